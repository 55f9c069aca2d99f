use statrs::function::erf::erfc;

use super::pareto::dominates;

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// `E[(b − Y)⁺]` for `Y ~ N(mu, sigma²)`; `sigma = 0` gives `max(0, b − mu)`.
pub fn expected_shortfall(b: f64, mu: f64, sigma: f64) -> f64 {
    if b == f64::NEG_INFINITY {
        return 0.0;
    }
    if sigma <= 0.0 {
        return (b - mu).max(0.0);
    }
    let z = (b - mu) / sigma;
    ((b - mu) * std_normal_cdf(z) + sigma * std_normal_pdf(z)).max(0.0)
}

/// Exact expected hypervolume improvement of a candidate with independent
/// Gaussian objectives `N(mean[i], std[i]²)` over `front`, both objectives
/// minimized and bounded by `reference`.
///
/// The non-dominated region is cut into vertical strips between consecutive
/// front points; each strip contributes the product of two one-dimensional
/// expected shortfalls.
pub fn ehvi(mean: [f64; 2], std: [f64; 2], front: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut pts: Vec<[f64; 2]> = front
        .iter()
        .copied()
        .filter(|p| p[0] < reference[0] && p[1] < reference[1])
        .collect();
    let all = pts.clone();
    pts.retain(|p| !all.iter().any(|q| dominates(q, p)));
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();

    let psi1 = |b: f64| expected_shortfall(b, mean[0], std[0]);
    let psi2 = |b: f64| expected_shortfall(b, mean[1], std[1]);

    let mut total = 0.0;
    let mut lower = f64::NEG_INFINITY;
    let mut upper = reference[1];
    for p in &pts {
        total += (psi1(p[0]) - psi1(lower)) * psi2(upper);
        lower = p[0];
        upper = p[1];
    }
    total += (psi1(reference[0]) - psi1(lower)) * psi2(upper);
    total.max(0.0)
}
