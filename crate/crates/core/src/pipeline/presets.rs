//! Named architectures: existing scalable GNNs expressed in the design
//! space, and the three searched representatives (V1–V3).

use crate::error::{Result, SgapError};
use crate::model::MessageAggregatorKind as Ma;

use super::arch::{ArchitectureConfig, GraphAggregator as Ga};

pub const PRESET_NAMES: [&str; 8] = [
    "sgc",
    "sign",
    "s2gc",
    "gbp",
    "pasca-appnp",
    "pasca-v1",
    "pasca-v2",
    "pasca-v3",
];

#[derive(Clone, Debug, PartialEq)]
pub struct Preset {
    pub config: ArchitectureConfig,
    pub notes: &'static str,
}

fn arch(k_pre: usize, ga_pre: Ga, ma: Ma, k_trans: usize, k_post: usize, ga_post: Ga) -> ArchitectureConfig {
    ArchitectureConfig {
        k_pre,
        ga_pre,
        ma,
        k_trans,
        k_post,
        ga_post,
    }
}

pub fn preset(name: &str) -> Result<Preset> {
    let (config, notes) = match name.to_ascii_lowercase().as_str() {
        "sgc" => (
            arch(2, Ga::AugNa, Ma::None, 1, 0, Ga::Unused),
            "last-step features into a linear classifier; k_pre=2 is a default",
        ),
        "sign" => (
            arch(3, Ga::AugNa, Ma::Concatenate, 1, 0, Ga::Unused),
            "graph aggregator is free for SIGN; aug_na and k_pre=3 are defaults",
        ),
        "s2gc" => (
            arch(10, Ga::Ppr(0.1), Ma::Mean, 1, 0, Ga::Unused),
            "mean over PPR steps; alpha=0.1 and k_pre=10 are defaults",
        ),
        "gbp" => (
            arch(3, Ga::AugNa, Ma::Weighted, 2, 0, Ga::Unused),
            "geometric step weights; k_trans>=2 with default 2, k_pre=3 is a default",
        ),
        "pasca-appnp" => (
            arch(0, Ga::Unused, Ma::None, 2, 10, Ga::Ppr(0.1)),
            "MLP followed by PPR smoothing of predictions; k_post=10, alpha=0.1 are defaults",
        ),
        "pasca-v1" => (
            arch(3, Ga::Ppr(0.1), Ma::Weighted, 2, 0, Ga::Unused),
            "searched representative V1",
        ),
        "pasca-v2" => (
            arch(6, Ga::AugNa, Ma::Adaptive, 2, 0, Ga::Unused),
            "searched representative V2",
        ),
        "pasca-v3" => (
            arch(6, Ga::AugNa, Ma::Adaptive, 3, 4, Ga::Ppr(0.3)),
            "searched representative V3",
        ),
        _ => {
            return Err(SgapError::UnknownPreset {
                name: name.to_string(),
                valid: PRESET_NAMES.join(", "),
            })
        }
    };
    debug_assert!(config.is_canonical());
    Ok(Preset { config, notes })
}
