//! Propagation scaling measurements shared by the CLI and the bench crate.

use std::time::Instant;

use serde::Serialize;

use crate::data::Dataset;
use crate::error::{Result, SgapError};
use crate::operator::{build_operator_with, OperatorOptions};
use crate::pipeline::ArchitectureConfig;
use crate::propagation::{propagate, MessageStack, PropagateOptions};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingRow {
    pub workers: usize,
    pub seconds: f64,
    /// Single-worker time divided by this row's time.
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// Every worker count produced a bitwise identical message stack.
    pub bitwise_identical: bool,
}

impl ScalingReport {
    pub fn to_table(&self) -> String {
        let mut s = String::from("workers\tseconds\tspeedup\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{:.6}\t{:.3}\n", r.workers, r.seconds, r.speedup));
        }
        s
    }
}

/// Times pre-processing propagation of `arch` for each worker count. The
/// single-worker run is always measured first as the baseline.
pub fn bench_scaling(
    data: &Dataset,
    arch: &ArchitectureConfig,
    workers: &[usize],
    repeats: usize,
) -> Result<ScalingReport> {
    let kind = arch
        .ga_pre
        .operator_kind()
        .ok_or_else(|| SgapError::Validation("architecture has no pre-processing stage".into()))?;
    if workers.contains(&0) {
        return Err(SgapError::Validation("worker counts must be positive".into()));
    }
    let op = build_operator_with(&data.graph, kind, OperatorOptions::default())?;
    let repeats = repeats.max(1);

    let time = |w: usize| -> Result<(f64, MessageStack)> {
        let opts = PropagateOptions::with_workers(w);
        let mut best = f64::INFINITY;
        let mut out = None;
        for _ in 0..repeats {
            let t = Instant::now();
            let stack = propagate(&op, &data.features, arch.k_pre, opts)?;
            best = best.min(t.elapsed().as_secs_f64());
            out = Some(stack);
        }
        Ok((best, out.expect("repeats >= 1")))
    };

    let (base_secs, base_stack) = time(1)?;
    let mut rows = Vec::with_capacity(workers.len());
    let mut identical = true;
    for &w in workers {
        let (secs, stack) = if w == 1 { (base_secs, base_stack.clone()) } else { time(w)? };
        identical &= stack.bitwise_eq(&base_stack);
        rows.push(ScalingRow {
            workers: w,
            seconds: secs,
            speedup: if w == 1 { 1.0 } else { base_secs / secs },
        });
    }
    Ok(ScalingReport { rows, bitwise_identical: identical })
}
