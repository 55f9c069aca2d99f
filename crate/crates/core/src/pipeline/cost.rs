//! Analytic inference cost in multiply-accumulate operations (MACs).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{combined_width, MessageAggregatorKind};

use super::arch::{enumerate_space, ArchitectureConfig};

/// Which stages count towards inference cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostScope {
    /// Pre-processing, combination, MLP and post-processing.
    #[default]
    Full,
    /// Excludes pre-processing, which a transductive deployment computes once.
    Online,
}

impl fmt::Display for CostScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CostScope::Full => "full",
            CostScope::Online => "online",
        })
    }
}

impl FromStr for CostScope {
    type Err = crate::SgapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(CostScope::Full),
            "online" => Ok(CostScope::Online),
            _ => Err(crate::SgapError::Validation(format!(
                "cost scope must be `full` or `online`, got `{s}`"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostModel {
    pub nodes: u64,
    /// Non-zeros of one propagation operator.
    pub nnz: u64,
    pub feat_dim: u64,
    pub classes: u64,
    pub hidden: u64,
    pub scope: CostScope,
}

impl CostModel {
    pub fn cost(&self, arch: &ArchitectureConfig) -> u64 {
        let (n, d, c, h) = (self.nodes, self.feat_dim, self.classes, self.hidden);
        let k_pre = arch.k_pre as u64;
        let pre = match self.scope {
            CostScope::Full => k_pre * self.nnz * d,
            CostScope::Online => 0,
        };
        let combine = match arch.ma {
            MessageAggregatorKind::None | MessageAggregatorKind::Concatenate => 0,
            _ => n * d * (k_pre + 1),
        };
        let input = combined_width(arch.ma, d as usize, arch.k_pre) as u64;
        let mlp = match arch.k_trans {
            0 => 0,
            1 => input * c,
            k => input * h + (k as u64 - 2) * h * h + h * c,
        };
        let post = arch.k_post as u64 * self.nnz * c;
        pre + combine + n * mlp + post
    }

    /// Smallest and largest cost over the whole design space.
    pub fn bounds(&self) -> (u64, u64) {
        enumerate_space()
            .map(|a| self.cost(&a))
            .fold((u64::MAX, 0), |(lo, hi), x| (lo.min(x), hi.max(x)))
    }

    /// Cost min-max scaled over the design space, in `[0, 1]`.
    pub fn normalized(&self, arch: &ArchitectureConfig, bounds: (u64, u64)) -> f64 {
        let (lo, hi) = bounds;
        if hi <= lo {
            return 0.0;
        }
        ((self.cost(arch).saturating_sub(lo)) as f64 / (hi - lo) as f64).clamp(0.0, 1.0)
    }
}

/// Full-scope cost with the default hidden width of 64.
pub fn inference_cost(arch: &ArchitectureConfig, n: u64, nnz: u64, d: u64, c: u64) -> u64 {
    CostModel {
        nodes: n,
        nnz,
        feat_dim: d,
        classes: c,
        hidden: 64,
        scope: CostScope::Full,
    }
    .cost(arch)
}
