//! The three graph aggregators, materialized as sparse one-step operators.
//!
//! Every operator is stored as a CSR matrix `P` whose row `v` lists the
//! coefficients applied to neighbor messages, so one aggregation step is
//! `m^t = P · m^{t-1}` (plus the restart term for PPR).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SgapError};
use crate::graph::{augmented_degrees, count_edge_triangles, GraphCSR};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    /// Augmented normalized adjacency over `I + A`.
    AugNa,
    /// Approximate personalized PageRank with restart probability α.
    Ppr(f64),
    /// Triangle-weighted adjacency, row-normalized.
    TriangleIa,
}

impl fmt::Display for OperatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorKind::AugNa => write!(f, "aug_na"),
            OperatorKind::Ppr(a) => write!(f, "ppr({a})"),
            OperatorKind::TriangleIa => write!(f, "triangle_ia"),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatorOptions {
    /// Use `D̃⁻¹Ã` (row-stochastic) for AugNA instead of the default
    /// column-normalized `ÃD̃⁻¹`.
    #[serde(default)]
    pub aug_na_row_normalized: bool,
}

/// Sparse row-major coefficient matrix. Unlike [`GraphCSR`] it need not be
/// symmetric and may carry diagonal entries.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn num_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn row(&self, v: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[v]..self.row_ptr[v + 1];
        (&self.col_idx[r.clone()], &self.values[r])
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|v| self.row(v).1.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n];
        for (&c, &w) in self.col_idx.iter().zip(&self.values) {
            s[c] += w;
        }
        s
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n]; self.n];
        for (v, row) in d.iter_mut().enumerate() {
            let (cols, vals) = self.row(v);
            for (&u, &w) in cols.iter().zip(vals) {
                row[u] += w;
            }
        }
        d
    }

    /// Builds `I + G` with each entry rescaled by `f(v, u, weight)`; entries
    /// whose result is exactly zero are dropped. Rows stay sorted.
    fn augmented_with(g: &GraphCSR, mut f: impl FnMut(usize, usize, f64) -> f64) -> Self {
        let n = g.num_nodes();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(g.nnz() + n);
        let mut values = Vec::with_capacity(g.nnz() + n);
        row_ptr.push(0);
        for v in 0..n {
            let mut self_done = false;
            let mut push = |u: usize, w: f64| {
                let x = f(v, u, w);
                if x != 0.0 {
                    col_idx.push(u);
                    values.push(x);
                }
            };
            for (u, w) in g.row(v) {
                if !self_done && u > v {
                    push(v, 1.0);
                    self_done = true;
                }
                push(u, w);
            }
            if !self_done {
                push(v, 1.0);
            }
            row_ptr.push(col_idx.len());
        }
        SparseOperator {
            n,
            row_ptr,
            col_idx,
            values,
        }
    }

    #[cfg(test)]
    pub(crate) fn identity(n: usize) -> Self {
        SparseOperator {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }
}

/// One graph aggregator ready to apply. Immutable and `Sync`.
#[derive(Clone, Debug)]
pub struct PropagationOperator {
    base: SparseOperator,
    restart_alpha: f64,
    kind: OperatorKind,
    options: OperatorOptions,
}

impl PropagationOperator {
    pub fn options(&self) -> OperatorOptions {
        self.options
    }

    pub fn base(&self) -> &SparseOperator {
        &self.base
    }

    pub fn restart_alpha(&self) -> f64 {
        self.restart_alpha
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn num_nodes(&self) -> usize {
        self.base.n
    }

    /// Computes row `v` of the next message matrix into `out`.
    ///
    /// Accumulation follows CSR order, so a row's value never depends on how
    /// rows are scheduled across threads.
    #[inline]
    pub(crate) fn step_row(&self, v: usize, prev: &[f64], origin: &[f64], dim: usize, out: &mut [f64]) {
        let alpha = self.restart_alpha;
        if alpha == 1.0 {
            out.copy_from_slice(&origin[v * dim..(v + 1) * dim]);
            return;
        }
        out.iter_mut().for_each(|x| *x = 0.0);
        let (cols, vals) = self.base.row(v);
        for (&u, &w) in cols.iter().zip(vals) {
            let src = &prev[u * dim..(u + 1) * dim];
            for (o, &s) in out.iter_mut().zip(src) {
                *o += w * s;
            }
        }
        if alpha > 0.0 {
            let o0 = &origin[v * dim..(v + 1) * dim];
            for (o, &x0) in out.iter_mut().zip(o0) {
                *o = alpha * x0 + (1.0 - alpha) * *o;
            }
        }
    }
}

pub fn build_operator(g: &GraphCSR, kind: OperatorKind) -> Result<PropagationOperator> {
    build_operator_with(g, kind, OperatorOptions::default())
}

pub fn build_operator_with(
    g: &GraphCSR,
    kind: OperatorKind,
    opts: OperatorOptions,
) -> Result<PropagationOperator> {
    if g.has_self_loops() {
        return Err(SgapError::Invariant(
            "operators are built from loop-free graphs; self-connections are added here".into(),
        ));
    }
    let (base, restart_alpha) = match kind {
        OperatorKind::AugNa => {
            let d = augmented_degrees(g);
            let base = if opts.aug_na_row_normalized {
                SparseOperator::augmented_with(g, |v, _, w| w / d[v])
            } else {
                SparseOperator::augmented_with(g, |_, u, w| w / d[u])
            };
            (base, 0.0)
        }
        OperatorKind::Ppr(alpha) => {
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(SgapError::Parameter(format!(
                    "PPR restart probability must lie in (0, 1], got {alpha}"
                )));
            }
            let d = augmented_degrees(g);
            let base = SparseOperator::augmented_with(g, |v, u, w| w / (d[v] * d[u]).sqrt());
            (base, alpha)
        }
        OperatorKind::TriangleIa => {
            let tri = count_edge_triangles(g)?;
            // row sum of A^tri plus the unit self-loop
            let row_sum: Vec<f64> = (0..tri.num_nodes())
                .map(|v| 1.0 + tri.row(v).map(|(_, w)| w).sum::<f64>())
                .collect();
            let base = SparseOperator::augmented_with(&tri, |v, _, w| w / row_sum[v]);
            (base, 0.0)
        }
    };
    Ok(PropagationOperator {
        base,
        restart_alpha,
        kind,
        options: opts,
    })
}
