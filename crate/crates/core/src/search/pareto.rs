use serde::{Deserialize, Serialize};

use crate::pipeline::ArchitectureConfig;

/// Reference point for hypervolume and EHVI in normalized objective space.
pub const DEFAULT_REF: [f64; 2] = [1.1, 1.1];

/// One evaluated configuration. Objectives are `[val_error, normalized_cost]`,
/// both minimized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub config: ArchitectureConfig,
    pub objectives: [f64; 2],
    pub test_accuracy: f64,
    #[serde(default)]
    pub failed: bool,
    #[serde(skip)]
    pub eval_seconds: f64,
}

/// `a` Pareto-dominates `b` under minimization.
pub fn dominates(a: &[f64; 2], b: &[f64; 2]) -> bool {
    a[0] <= b[0] && a[1] <= b[1] && (a[0] < b[0] || a[1] < b[1])
}

/// Non-dominated subset of the observations seen so far, in insertion order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParetoFront {
    members: Vec<Observation>,
}

impl ParetoFront {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn members(&self) -> &[Observation] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn points(&self) -> Vec<[f64; 2]> {
        self.members.iter().map(|m| m.objectives).collect()
    }

    /// Adds `obs` unless some member dominates it, evicting members it
    /// dominates. Returns whether it was added.
    pub fn insert(&mut self, obs: Observation) -> bool {
        if self.members.iter().any(|m| dominates(&m.objectives, &obs.objectives)) {
            return false;
        }
        self.members.retain(|m| !dominates(&obs.objectives, &m.objectives));
        self.members.push(obs);
        true
    }
}

/// Area dominated by `points` and bounded by `reference`. Points that do not
/// strictly dominate the reference contribute nothing and are reported.
pub fn hypervolume(points: &[[f64; 2]], reference: [f64; 2]) -> f64 {
    let mut inside: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    let mut excluded = 0usize;
    for p in points {
        if p[0] < reference[0] && p[1] < reference[1] {
            inside.push(*p);
        } else {
            excluded += 1;
        }
    }
    if excluded > 0 {
        log::warn!("{excluded} point(s) outside the reference box excluded from hypervolume");
    }
    hv_sweep(inside, reference)
}

pub(crate) fn hv_sweep(mut pts: Vec<[f64; 2]>, reference: [f64; 2]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut hv = 0.0;
    let mut best_f2 = reference[1];
    for (i, p) in pts.iter().enumerate() {
        best_f2 = best_f2.min(p[1]);
        let next_x = pts.get(i + 1).map_or(reference[0], |q| q[0]);
        hv += (next_x - p[0]) * (reference[1] - best_f2);
    }
    hv
}
