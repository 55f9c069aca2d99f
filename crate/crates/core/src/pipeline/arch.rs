use std::fmt;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SgapError};
use crate::model::MessageAggregatorKind;
use crate::operator::OperatorKind;

pub const MAX_K_PRE: usize = 10;
pub const MAX_K_TRANS: usize = 10;
pub const MAX_K_POST: usize = 10;

/// Distinct canonical configurations: `(1 + 10·5) · 6 · 10 · (1 + 10·5)`.
pub const SPACE_SIZE: usize = STAGE_CHOICES * 6 * MAX_K_TRANS * STAGE_CHOICES;
/// The raw grid before collapsing inert aggregator choices: `11·5·6·10·11·5`.
pub const RAW_GRID_SIZE: usize = (MAX_K_PRE + 1) * 5 * 6 * MAX_K_TRANS * (MAX_K_POST + 1) * 5;

/// `(k, aggregator)` pairs of one propagation stage: `k = 0` alone, or
/// `k ∈ 1..=10` with one of five aggregators.
const STAGE_CHOICES: usize = 1 + MAX_K_PRE * 5;

const PPR_ALPHAS: [f64; 3] = [0.1, 0.2, 0.3];

/// Graph aggregator choice of a propagation stage. `Unused` marks a stage
/// with zero steps.
///
/// JSON forms: `"unused"`, `"aug_na"`, `{"ppr": 0.3}`, `"triangle_ia"`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphAggregator {
    Unused,
    AugNa,
    Ppr(f64),
    TriangleIa,
}

impl Eq for GraphAggregator {}

impl Hash for GraphAggregator {
    fn hash<H: Hasher>(&self, state: &mut H) {
        std::mem::discriminant(self).hash(state);
        if let GraphAggregator::Ppr(a) = self {
            a.to_bits().hash(state);
        }
    }
}

impl GraphAggregator {
    /// The five usable choices in encoding order.
    pub const CHOICES: [GraphAggregator; 5] = [
        GraphAggregator::AugNa,
        GraphAggregator::Ppr(0.1),
        GraphAggregator::Ppr(0.2),
        GraphAggregator::Ppr(0.3),
        GraphAggregator::TriangleIa,
    ];

    /// Position within [`Self::CHOICES`]; `None` for `Unused` or an
    /// off-grid PPR restart probability.
    pub fn choice_index(self) -> Option<usize> {
        match self {
            GraphAggregator::Unused => None,
            GraphAggregator::AugNa => Some(0),
            GraphAggregator::Ppr(a) => PPR_ALPHAS.iter().position(|&x| x == a).map(|i| i + 1),
            GraphAggregator::TriangleIa => Some(4),
        }
    }

    pub fn operator_kind(self) -> Option<OperatorKind> {
        match self {
            GraphAggregator::Unused => None,
            GraphAggregator::AugNa => Some(OperatorKind::AugNa),
            GraphAggregator::Ppr(a) => Some(OperatorKind::Ppr(a)),
            GraphAggregator::TriangleIa => Some(OperatorKind::TriangleIa),
        }
    }

    fn snapped(self) -> Result<Self> {
        match self {
            GraphAggregator::Ppr(a) => PPR_ALPHAS
                .iter()
                .find(|&&x| (x - a).abs() < 1e-9)
                .map(|&x| GraphAggregator::Ppr(x))
                .ok_or_else(|| {
                    SgapError::Validation(format!(
                        "PPR restart probability {a} is not one of 0.1, 0.2, 0.3"
                    ))
                }),
            other => Ok(other),
        }
    }
}

impl fmt::Display for GraphAggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GraphAggregator::Unused => f.write_str("unused"),
            GraphAggregator::AugNa => f.write_str("aug_na"),
            GraphAggregator::Ppr(a) => write!(f, "ppr({a})"),
            GraphAggregator::TriangleIa => f.write_str("triangle_ia"),
        }
    }
}

/// One point of the design space.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub k_pre: usize,
    pub ga_pre: GraphAggregator,
    pub ma: MessageAggregatorKind,
    pub k_trans: usize,
    pub k_post: usize,
    pub ga_post: GraphAggregator,
}

impl fmt::Display for ArchitectureConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {}, {}, {}, {})",
            self.k_pre, self.ga_pre, self.ma, self.k_trans, self.k_post, self.ga_post
        )
    }
}

fn stage_canonical(k: usize, ga: GraphAggregator, what: &str) -> Result<GraphAggregator> {
    if k > MAX_K_PRE {
        return Err(SgapError::Validation(format!("k_{what}={k} exceeds {MAX_K_PRE}")));
    }
    if k == 0 {
        return Ok(GraphAggregator::Unused);
    }
    match ga.snapped()? {
        GraphAggregator::Unused => Err(SgapError::Validation(format!(
            "k_{what}={k} needs a graph aggregator, got unused"
        ))),
        other => Ok(other),
    }
}

/// Validates ranges and collapses the aggregator of any zero-step stage to
/// `Unused`. Idempotent.
pub fn canonicalize(raw: ArchitectureConfig) -> Result<ArchitectureConfig> {
    if !(1..=MAX_K_TRANS).contains(&raw.k_trans) {
        return Err(SgapError::Validation(format!(
            "k_trans={} outside 1..={MAX_K_TRANS}",
            raw.k_trans
        )));
    }
    Ok(ArchitectureConfig {
        ga_pre: stage_canonical(raw.k_pre, raw.ga_pre, "pre")?,
        ga_post: stage_canonical(raw.k_post, raw.ga_post, "post")?,
        ..raw
    })
}

fn stage_index(k: usize, ga: GraphAggregator) -> Option<usize> {
    match k {
        0 => Some(0),
        _ => ga.choice_index().map(|c| 1 + (k - 1) * 5 + c),
    }
}

fn stage_from_index(i: usize) -> (usize, GraphAggregator) {
    if i == 0 {
        (0, GraphAggregator::Unused)
    } else {
        (1 + (i - 1) / 5, GraphAggregator::CHOICES[(i - 1) % 5])
    }
}

impl ArchitectureConfig {
    pub fn is_canonical(&self) -> bool {
        canonicalize(*self).is_ok_and(|c| c == *self)
    }

    /// Position in lexicographic enumeration order; `None` when not canonical.
    pub fn index(&self) -> Option<usize> {
        if !self.is_canonical() {
            return None;
        }
        let pre = stage_index(self.k_pre, self.ga_pre)?;
        let post = stage_index(self.k_post, self.ga_post)?;
        Some(((pre * 6 + self.ma.index()) * MAX_K_TRANS + (self.k_trans - 1)) * STAGE_CHOICES + post)
    }

    /// Inverse of [`Self::index`].
    pub fn from_index(i: usize) -> Option<Self> {
        if i >= SPACE_SIZE {
            return None;
        }
        let post = i % STAGE_CHOICES;
        let rest = i / STAGE_CHOICES;
        let k_trans = rest % MAX_K_TRANS + 1;
        let rest = rest / MAX_K_TRANS;
        let ma = MessageAggregatorKind::ALL[rest % 6];
        let pre = rest / 6;
        let (k_pre, ga_pre) = stage_from_index(pre);
        let (k_post, ga_post) = stage_from_index(post);
        Some(ArchitectureConfig {
            k_pre,
            ga_pre,
            ma,
            k_trans,
            k_post,
            ga_post,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

/// Every canonical configuration exactly once, in lexicographic order of
/// `(k_pre, ga_pre, ma, k_trans, k_post, ga_post)` with `Unused` first.
pub fn enumerate_space() -> impl ExactSizeIterator<Item = ArchitectureConfig> {
    (0..SPACE_SIZE).map(|i| ArchitectureConfig::from_index(i).expect("index in range"))
}
