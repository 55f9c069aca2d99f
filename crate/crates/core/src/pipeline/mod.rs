//! End-to-end pipeline: the architecture design space, presets, the
//! inference-cost objective and the three-stage run.

mod arch;
mod cost;
mod presets;
mod run;

pub use arch::{
    canonicalize, enumerate_space, ArchitectureConfig, GraphAggregator, RAW_GRID_SIZE, SPACE_SIZE,
};
pub use cost::{inference_cost, CostModel, CostScope};
pub use presets::{preset, Preset, PRESET_NAMES};
pub use run::{cost_model, run_sgap, EvalResult, RunContext, SgapRun, WallTimes};
