//! Fixtures shared by the criterion benchmarks.

use sgap_core::data::{synth_sbm, Dataset, SbmParams};
use sgap_core::search::{Observation, SearchConfig};
use sgap_core::pipeline::{ArchitectureConfig, SPACE_SIZE};

/// Sparse two-block graph with `n` nodes and 32-dimensional features.
pub fn sbm_fixture(n: usize) -> Dataset {
    let p_in = (20.0 / n as f64).min(1.0);
    synth_sbm(&SbmParams { n, blocks: 2, p_in, p_out: p_in / 10.0, d: 32, noise: 1.0, seed: 0 })
        .expect("valid fixture parameters")
}

/// A search history of `len` evaluated configs with smooth synthetic objectives.
pub fn history_fixture(len: usize) -> Vec<Observation> {
    (0..len)
        .map(|i| {
            let config = ArchitectureConfig::from_index(i * 7919 % SPACE_SIZE).expect("in range");
            let t = i as f64 / len as f64;
            Observation {
                config,
                objectives: [t, (1.0 - t).powi(2)],
                test_accuracy: 1.0 - t,
                failed: false,
                eval_seconds: 0.0,
            }
        })
        .collect()
}

pub fn search_config(candidates: usize) -> SearchConfig {
    SearchConfig { candidates, ..SearchConfig::default() }
}
