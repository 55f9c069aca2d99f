use crate::error::{Result, SgapError};
use crate::matrix::{dot, Matrix};
use crate::propagation::MessageStack;

use super::{MessageAggregatorKind, ModelParams};

/// Output of a message aggregator.
#[derive(Clone, Debug)]
pub struct Combined {
    pub c: Matrix,
    /// Per node and step gate weight `sigmoid(s · m^i_v)`; Adaptive only.
    pub gates: Option<Matrix>,
}

/// Width of the combined message for a `dim`-wide stack of `k + 1` steps.
pub fn combined_width(kind: MessageAggregatorKind, dim: usize, k: usize) -> usize {
    match kind {
        MessageAggregatorKind::Concatenate => (k + 1) * dim,
        _ => dim,
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn combine_messages(
    kind: MessageAggregatorKind,
    stack: &MessageStack,
    params: &ModelParams,
) -> Result<Combined> {
    let (n, d) = (stack.num_nodes(), stack.dim());
    let steps = stack.steps();
    let mut gates = None;
    let c = match kind {
        MessageAggregatorKind::None => stack.last().clone(),
        MessageAggregatorKind::Mean => {
            let mut c = steps[0].clone();
            for m in &steps[1..] {
                c.add_scaled(m, 1.0);
            }
            c.scale(1.0 / steps.len() as f64);
            c
        }
        MessageAggregatorKind::Max => {
            let mut c = steps[0].clone();
            for m in &steps[1..] {
                for (a, &b) in c.as_mut_slice().iter_mut().zip(m.as_slice()) {
                    // strict comparison keeps the earliest step on ties
                    if b > *a {
                        *a = b;
                    }
                }
            }
            c
        }
        MessageAggregatorKind::Concatenate => {
            let w = steps.len() * d;
            let mut c = Matrix::zeros(n, w);
            for v in 0..n {
                let row = c.row_mut(v);
                for (t, m) in steps.iter().enumerate() {
                    row[t * d..(t + 1) * d].copy_from_slice(m.row(v));
                }
            }
            c
        }
        MessageAggregatorKind::Weighted => {
            let beta = params.weighted_beta;
            if !(beta > 0.0 && beta < 1.0) {
                return Err(SgapError::Config(format!(
                    "weighted aggregator needs beta in (0, 1), got {beta}"
                )));
            }
            let mut c = Matrix::zeros(n, d);
            let mut w = beta;
            for m in steps {
                c.add_scaled(m, w);
                w *= 1.0 - beta;
            }
            c
        }
        MessageAggregatorKind::Adaptive => {
            let s = params.gate_s.as_ref().ok_or_else(|| {
                SgapError::Config("adaptive aggregator requires a gate vector".into())
            })?;
            if s.len() != d {
                return Err(SgapError::dim(format!("gate length {d}"), s.len()));
            }
            let mut c = Matrix::zeros(n, d);
            let mut g = Matrix::zeros(n, steps.len());
            for v in 0..n {
                for (i, m) in steps.iter().enumerate() {
                    let mv = m.row(v);
                    let w = sigmoid(dot(s, mv));
                    g.set(v, i, w);
                    for (o, &x) in c.row_mut(v).iter_mut().zip(mv) {
                        *o += w * x;
                    }
                }
            }
            gates = Some(g);
            c
        }
    };
    Ok(Combined { c, gates })
}

/// Gradient of the loss w.r.t. the gate vector, given `dL/dc`.
///
/// With `w_i = σ(s·m_i)` and `c = Σ_i w_i m_i`:
/// `dL/ds = Σ_v Σ_i (dL/dc_v · m_i) w_i (1 − w_i) m_i`.
pub(crate) fn gate_gradient(stack: &MessageStack, gates: &Matrix, dc: &Matrix) -> Vec<f64> {
    let d = stack.dim();
    let mut ds = vec![0.0; d];
    for v in 0..stack.num_nodes() {
        let g = dc.row(v);
        for (i, m) in stack.steps().iter().enumerate() {
            let mv = m.row(v);
            let w = gates.get(v, i);
            let coef = dot(g, mv) * w * (1.0 - w);
            if coef != 0.0 {
                for (a, &x) in ds.iter_mut().zip(mv) {
                    *a += coef * x;
                }
            }
        }
    }
    ds
}

/// One row of the gate-weight heat map: nodes whose degree falls in
/// `[degree_lo, degree_hi]` and their mean gate weight per step.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HeatmapRow {
    pub degree_lo: usize,
    pub degree_hi: usize,
    pub nodes: usize,
    pub mean_gate: Vec<f64>,
}

/// Averages gate weights over power-of-two degree buckets
/// (`0`, `1`, `2-3`, `4-7`, ...). Empty buckets are omitted.
pub fn gate_heatmap(gates: &Matrix, degrees: &[usize]) -> Vec<HeatmapRow> {
    assert_eq!(gates.rows(), degrees.len());
    let bucket = |deg: usize| -> usize {
        if deg == 0 {
            0
        } else {
            1 + deg.ilog2() as usize
        }
    };
    let nb = degrees.iter().map(|&d| bucket(d)).max().map_or(0, |b| b + 1);
    let steps = gates.cols();
    let mut sums = vec![vec![0.0; steps]; nb];
    let mut counts = vec![0usize; nb];
    for (v, &deg) in degrees.iter().enumerate() {
        let b = bucket(deg);
        counts[b] += 1;
        for (s, &g) in sums[b].iter_mut().zip(gates.row(v)) {
            *s += g;
        }
    }
    (0..nb)
        .filter(|&b| counts[b] > 0)
        .map(|b| {
            let (lo, hi) = if b == 0 { (0, 0) } else { (1 << (b - 1), (1 << b) - 1) };
            HeatmapRow {
                degree_lo: lo,
                degree_hi: hi,
                nodes: counts[b],
                mean_gate: sums[b].iter().map(|s| s / counts[b] as f64).collect(),
            }
        })
        .collect()
}
