//! Multi-objective architecture search: independent GP surrogates per
//! objective, exact bi-objective expected hypervolume improvement, and the
//! suggest/evaluate loop.

mod benchmark;
mod ehvi;
mod encode;
mod engine;
mod gp;
mod pareto;

pub use benchmark::AnalyticBenchmark;
pub use ehvi::{ehvi, expected_shortfall};
pub use encode::{encode, ENCODING_LEN};
pub use engine::{
    search, suggest, Evaluation, Evaluator, SearchConfig, SearchOutcome, SgapEvaluator, Suggestion,
};
pub use gp::{gp_fit, GpSurrogate, GP_NOISE};
pub use pareto::{dominates, hypervolume, Observation, ParetoFront, DEFAULT_REF};
