//! Model-training stage: message aggregators, the MLP updater, gradients,
//! Adam and the early-stopped training loop.

mod adam;
mod aggregator;
mod async_train;
mod mlp;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use adam::Adam;
pub use aggregator::{combine_messages, combined_width, gate_heatmap, Combined, HeatmapRow};
pub use async_train::{train_async, AsyncOptions};
pub use mlp::{
    loss_and_grads, mlp_forward, mlp_forward_with_masks, predict, DropoutMasks, ForwardCache,
    Layer, ModelParams, ParamGrads,
};
pub(crate) use train::INIT_STREAM;
pub use train::{
    accuracy, params_from_bytes, params_to_bytes, train, EpochRecord, Splits, TrainConfig,
    TrainedModel, WEIGHTS_MAGIC,
};

/// How the `K+1` per-step messages of a node are reduced to one vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageAggregatorKind {
    None,
    Mean,
    Max,
    Concatenate,
    Weighted,
    Adaptive,
}

impl MessageAggregatorKind {
    pub const ALL: [MessageAggregatorKind; 6] = [
        MessageAggregatorKind::None,
        MessageAggregatorKind::Mean,
        MessageAggregatorKind::Max,
        MessageAggregatorKind::Concatenate,
        MessageAggregatorKind::Weighted,
        MessageAggregatorKind::Adaptive,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            MessageAggregatorKind::None => "none",
            MessageAggregatorKind::Mean => "mean",
            MessageAggregatorKind::Max => "max",
            MessageAggregatorKind::Concatenate => "concatenate",
            MessageAggregatorKind::Weighted => "weighted",
            MessageAggregatorKind::Adaptive => "adaptive",
        }
    }
}

impl fmt::Display for MessageAggregatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MessageAggregatorKind {
    type Err = crate::SgapError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| crate::SgapError::Validation(format!("unknown message aggregator `{s}`")))
    }
}
