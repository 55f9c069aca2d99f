use crate::error::{Result, SgapError};

/// Observation noise variance added to the kernel diagonal.
pub const GP_NOISE: f64 = 1e-6;
const JITTER_LADDER: [f64; 3] = [GP_NOISE, 1e-5, 1e-4];

/// Zero-mean GP with an isotropic squared-exponential kernel on
/// standardized targets.
#[derive(Clone, Debug)]
pub struct GpSurrogate {
    x: Vec<Vec<f64>>,
    y_mean: f64,
    y_std: f64,
    lengthscale: f64,
    noise: f64,
    /// Lower Cholesky factor of `K + noise·I`, row-major.
    chol: Vec<f64>,
    /// `(K + noise·I)⁻¹ · y_standardized`.
    alpha: Vec<f64>,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if s.is_nan() || s <= 0.0 {
                    return None;
                }
                l[i * n + i] = s.sqrt();
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

fn solve_lower(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in 0..n {
        let mut s = x[i];
        for k in 0..i {
            s -= l[i * n + k] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

fn solve_upper_t(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in (i + 1)..n {
            s -= l[k * n + i] * x[k];
        }
        x[i] = s / l[i * n + i];
    }
    x
}

/// Median of the pairwise Euclidean distances; 1.0 when all points coincide.
pub(crate) fn median_heuristic(x: &[Vec<f64>]) -> f64 {
    let mut d: Vec<f64> = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in (i + 1)..x.len() {
            d.push(sq_dist(&x[i], &x[j]).sqrt());
        }
    }
    d.sort_by(f64::total_cmp);
    let m = match d.len() {
        0 => 0.0,
        len if len % 2 == 1 => d[len / 2],
        len => 0.5 * (d[len / 2 - 1] + d[len / 2]),
    };
    if m > 0.0 {
        m
    } else {
        1.0
    }
}

/// Fits a GP with the median-heuristic lengthscale.
pub fn gp_fit(x: &[Vec<f64>], y: &[f64]) -> Result<GpSurrogate> {
    if x.len() < 2 {
        return Err(SgapError::Fit(format!("need at least 2 points, got {}", x.len())));
    }
    if x.len() != y.len() {
        return Err(SgapError::Fit(format!("{} inputs but {} targets", x.len(), y.len())));
    }
    let dim = x[0].len();
    if x.iter().any(|r| r.len() != dim) {
        return Err(SgapError::Fit("inputs of differing dimension".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(SgapError::Fit("non-finite input or target".into()));
    }
    let n = x.len();
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let var = y.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
    let y_std = if var > 0.0 { var.sqrt() } else { 1.0 };
    let ys: Vec<f64> = y.iter().map(|v| (v - y_mean) / y_std).collect();
    let lengthscale = median_heuristic(x);

    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let v = (-sq_dist(&x[i], &x[j]) / (2.0 * lengthscale * lengthscale)).exp();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    for &noise in &JITTER_LADDER {
        let mut kn = k.clone();
        for i in 0..n {
            kn[i * n + i] += noise;
        }
        if let Some(chol) = cholesky(&kn, n) {
            let alpha = solve_upper_t(&chol, n, &solve_lower(&chol, n, &ys));
            return Ok(GpSurrogate {
                x: x.to_vec(),
                y_mean,
                y_std,
                lengthscale,
                noise,
                chol,
                alpha,
            });
        }
    }
    Err(SgapError::Numerical(
        "kernel matrix not positive definite even with jitter 1e-4".into(),
    ))
}

impl GpSurrogate {
    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    /// Diagonal term that made the factorization succeed.
    pub fn noise(&self) -> f64 {
        self.noise
    }

    pub fn y_mean(&self) -> f64 {
        self.y_mean
    }

    pub fn y_std(&self) -> f64 {
        self.y_std
    }

    fn kvec(&self, x: &[f64]) -> Vec<f64> {
        let l2 = 2.0 * self.lengthscale * self.lengthscale;
        self.x.iter().map(|xi| (-sq_dist(xi, x) / l2).exp()).collect()
    }

    /// Posterior `(mean, stddev)` of the latent function at `x`, in the
    /// original target units.
    pub fn predict(&self, x: &[f64]) -> (f64, f64) {
        let n = self.x.len();
        let ks = self.kvec(x);
        let mu: f64 = ks.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let v = solve_lower(&self.chol, n, &ks);
        let var = (1.0 - v.iter().map(|t| t * t).sum::<f64>()).max(0.0);
        (self.y_mean + self.y_std * mu, self.y_std * var.sqrt())
    }
}
