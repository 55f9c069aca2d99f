//! Decoupled scalable graph neural networks and a multi-objective search
//! over their design space.
//!
//! A model runs in three stages: messages are propagated over the graph
//! ahead of time ([`propagation`]), a message aggregator plus MLP is trained
//! on the pre-computed messages ([`model`]), and soft predictions are
//! propagated once more ([`pipeline`]). [`search`] looks for architectures
//! that trade off validation error against inference cost.

pub mod bench;
pub mod data;
pub mod error;
pub mod graph;
pub mod matrix;
pub mod model;
pub mod operator;
pub mod pipeline;
pub mod propagation;
pub mod search;

pub use error::{Result, SgapError};
pub use graph::{augmented_degrees, count_edge_triangles, load_edge_list, GraphCSR};
pub use matrix::Matrix;
pub use model::{MessageAggregatorKind, ModelParams, Splits, TrainConfig, TrainedModel};
pub use operator::{build_operator, OperatorKind, PropagationOperator};
pub use pipeline::{ArchitectureConfig, EvalResult, GraphAggregator};
pub use propagation::{propagate, MessageStack, PropagateOptions};

/// ChaCha8 generator for `seed` on an independent `stream`.
pub(crate) fn model_rng(seed: u64, stream: u64) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
