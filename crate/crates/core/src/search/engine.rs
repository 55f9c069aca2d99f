use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ehvi::ehvi;
use super::encode::encode;
use super::gp::gp_fit;
use super::pareto::{dominates, hypervolume, Observation, ParetoFront, DEFAULT_REF};
use crate::data::Dataset;
use crate::error::{Result, SgapError};
use crate::model::TrainConfig;
use crate::pipeline::{cost_model, run_sgap, ArchitectureConfig, RunContext, SPACE_SIZE};

const SEARCH_STREAM: u64 = 3;

/// Objectives and side information for one evaluated architecture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub val_error: f64,
    /// Cost scaled to `[0, 1]` with bounds that do not change during a search.
    pub normalized_cost: f64,
    pub test_accuracy: f64,
}

pub trait Evaluator {
    fn evaluate(&mut self, arch: &ArchitectureConfig) -> Result<Evaluation>;
}

/// Trains and evaluates each architecture on a dataset.
pub struct SgapEvaluator<'a> {
    data: &'a Dataset,
    cfg: TrainConfig,
    ctx: RunContext<'a>,
}

impl<'a> SgapEvaluator<'a> {
    pub fn new(data: &'a Dataset, cfg: TrainConfig, mut ctx: RunContext<'a>) -> Self {
        if ctx.cost_bounds.is_none() {
            ctx.cost_bounds = Some(cost_model(data, &cfg, ctx.cost_scope).bounds());
        }
        Self { data, cfg, ctx }
    }
}

impl Evaluator for SgapEvaluator<'_> {
    fn evaluate(&mut self, arch: &ArchitectureConfig) -> Result<Evaluation> {
        let run = run_sgap(self.data, arch, &self.cfg, &self.ctx)?;
        Ok(Evaluation {
            val_error: run.eval.val_error,
            normalized_cost: run.eval.normalized_cost,
            test_accuracy: run.eval.test_accuracy,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    /// Total number of evaluations, including the random initial design.
    pub budget: usize,
    pub init_samples: usize,
    pub candidates: usize,
    pub seed: u64,
    pub reference: [f64; 2],
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            budget: 60,
            init_samples: 10,
            candidates: 500,
            seed: 0,
            reference: DEFAULT_REF,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.init_samples < 2 {
            return Err(SgapError::Validation("init_samples must be at least 2".into()));
        }
        if self.budget < self.init_samples {
            return Err(SgapError::Validation(format!(
                "budget {} is smaller than the initial design of {}",
                self.budget, self.init_samples
            )));
        }
        if self.candidates == 0 {
            return Err(SgapError::Validation("candidates must be positive".into()));
        }
        if self.reference.iter().any(|r| !r.is_finite()) {
            return Err(SgapError::Validation("reference point must be finite".into()));
        }
        Ok(())
    }
}

/// The next configuration to evaluate and, once surrogates are in use, the
/// acquisition value of every scored candidate.
#[derive(Clone, Debug)]
pub struct Suggestion {
    pub config: ArchitectureConfig,
    pub ehvi: Option<f64>,
    pub candidates: Vec<(ArchitectureConfig, f64)>,
}

fn unseen_pool(seen: &HashSet<usize>, limit: usize) -> Option<Vec<usize>> {
    let unseen = SPACE_SIZE - seen.len();
    (unseen <= limit).then(|| (0..SPACE_SIZE).filter(|i| !seen.contains(i)).collect())
}

fn sample_unseen<R: Rng>(rng: &mut R, seen: &HashSet<usize>, exclude: &HashSet<usize>) -> usize {
    loop {
        let i = rng.random_range(0..SPACE_SIZE);
        if !seen.contains(&i) && !exclude.contains(&i) {
            return i;
        }
    }
}

fn config_at(i: usize) -> ArchitectureConfig {
    ArchitectureConfig::from_index(i).expect("index below SPACE_SIZE")
}

fn min_max_columns(history: &[Observation]) -> Vec<[f64; 2]> {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for o in history {
        for j in 0..2 {
            lo[j] = lo[j].min(o.objectives[j]);
            hi[j] = hi[j].max(o.objectives[j]);
        }
    }
    history
        .iter()
        .map(|o| {
            let mut p = [0.0; 2];
            for j in 0..2 {
                let span = hi[j] - lo[j];
                p[j] = if span > 0.0 { (o.objectives[j] - lo[j]) / span } else { 0.0 };
            }
            p
        })
        .collect()
}

/// Proposes the next architecture given everything evaluated so far.
///
/// Until `init_samples` observations exist, returns an unseen configuration
/// drawn uniformly. Afterwards, fits one GP per objective on the history
/// (objectives min-max scaled over the history) and returns the candidate
/// with the largest EHVI, ties going to the earlier candidate.
pub fn suggest<R: Rng>(history: &[Observation], rng: &mut R, cfg: &SearchConfig) -> Result<Suggestion> {
    cfg.validate()?;
    let seen: HashSet<usize> = history.iter().filter_map(|o| o.config.index()).collect();
    if seen.len() >= SPACE_SIZE {
        return Err(SgapError::Exhausted);
    }

    if history.len() < cfg.init_samples {
        let i = match unseen_pool(&seen, cfg.candidates) {
            Some(pool) => pool[rng.random_range(0..pool.len())],
            None => sample_unseen(rng, &seen, &HashSet::new()),
        };
        return Ok(Suggestion { config: config_at(i), ehvi: None, candidates: Vec::new() });
    }

    let pool = match unseen_pool(&seen, cfg.candidates) {
        Some(pool) => pool,
        None => {
            let mut picked = HashSet::with_capacity(cfg.candidates);
            let mut pool = Vec::with_capacity(cfg.candidates);
            while pool.len() < cfg.candidates {
                let i = sample_unseen(rng, &seen, &picked);
                picked.insert(i);
                pool.push(i);
            }
            pool
        }
    };
    if pool.len() == 1 {
        return Ok(Suggestion { config: config_at(pool[0]), ehvi: None, candidates: Vec::new() });
    }

    let x: Vec<Vec<f64>> = history.iter().map(|o| encode(&o.config)).collect::<Result<_>>()?;
    let scaled = min_max_columns(history);
    let y0: Vec<f64> = scaled.iter().map(|p| p[0]).collect();
    let y1: Vec<f64> = scaled.iter().map(|p| p[1]).collect();
    let gp0 = gp_fit(&x, &y0)?;
    let gp1 = gp_fit(&x, &y1)?;
    let front: Vec<[f64; 2]> = scaled
        .iter()
        .filter(|p| !scaled.iter().any(|q| dominates(q, p)))
        .copied()
        .collect();

    let mut candidates = Vec::with_capacity(pool.len());
    let mut best: Option<(usize, f64)> = None;
    for (pos, &i) in pool.iter().enumerate() {
        let arch = config_at(i);
        let e = encode(&arch)?;
        let (m0, s0) = gp0.predict(&e);
        let (m1, s1) = gp1.predict(&e);
        let value = ehvi([m0, m1], [s0, s1], &front, cfg.reference);
        if best.is_none_or(|(_, b)| value > b) {
            best = Some((pos, value));
        }
        candidates.push((arch, value));
    }
    let (pos, value) = best.expect("pool has at least two candidates");
    Ok(Suggestion { config: candidates[pos].0, ehvi: Some(value), candidates })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SearchOutcome {
    pub reference: [f64; 2],
    pub front: ParetoFront,
    pub history: Vec<Observation>,
    /// Hypervolume of the front after each evaluation.
    pub hv_trace: Vec<f64>,
}

#[derive(Serialize)]
struct FrontEntry<'a> {
    config: &'a ArchitectureConfig,
    objectives: [f64; 2],
    test_accuracy: f64,
}

#[derive(Serialize)]
struct OutcomeJson<'a> {
    #[serde(rename = "ref")]
    reference: [f64; 2],
    front: Vec<FrontEntry<'a>>,
    history: &'a [Observation],
    hv_trace: &'a [f64],
}

impl SearchOutcome {
    pub fn to_json(&self) -> String {
        let doc = OutcomeJson {
            reference: self.reference,
            front: self
                .front
                .members()
                .iter()
                .map(|m| FrontEntry {
                    config: &m.config,
                    objectives: m.objectives,
                    test_accuracy: m.test_accuracy,
                })
                .collect(),
            history: &self.history,
            hv_trace: &self.hv_trace,
        };
        let mut s = serde_json::to_string_pretty(&doc).expect("plain data serializes");
        s.push('\n');
        s
    }

    pub fn front_csv(&self) -> String {
        let mut s = String::from("k_pre,ga_pre,ma,k_trans,k_post,ga_post,val_error,normalized_cost,test_accuracy\n");
        let mut members: Vec<&Observation> = self.front.members().iter().collect();
        members.sort_by(|a, b| a.objectives[0].total_cmp(&b.objectives[0]));
        for m in members {
            let c = &m.config;
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                c.k_pre, c.ga_pre, c.ma, c.k_trans, c.k_post, c.ga_post,
                m.objectives[0], m.objectives[1], m.test_accuracy
            );
        }
        s
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| SgapError::io(path, e))
    }

    pub fn write_front_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.front_csv()).map_err(|e| SgapError::io(path, e))
    }
}

/// Runs `budget` suggest/evaluate rounds. A failed evaluation is recorded
/// with objectives `(1, 1)` and the search continues. Stops early if every
/// configuration has been evaluated.
pub fn search<E: Evaluator + ?Sized>(evaluator: &mut E, cfg: &SearchConfig) -> Result<SearchOutcome> {
    cfg.validate()?;
    let mut rng = crate::model_rng(cfg.seed, SEARCH_STREAM);
    let mut history: Vec<Observation> = Vec::with_capacity(cfg.budget);
    let mut front = ParetoFront::new();
    let mut hv_trace = Vec::with_capacity(cfg.budget);

    for round in 0..cfg.budget {
        let suggestion = match suggest(&history, &mut rng, cfg) {
            Ok(s) => s,
            Err(SgapError::Exhausted) => {
                log::info!("design space exhausted after {round} evaluations");
                break;
            }
            Err(e) => return Err(e),
        };
        let arch = suggestion.config;
        let t = Instant::now();
        let result = evaluator.evaluate(&arch);
        let eval_seconds = t.elapsed().as_secs_f64();
        let obs = match result {
            Ok(ev) if ev.val_error.is_finite() && ev.normalized_cost.is_finite() => Observation {
                config: arch,
                objectives: [ev.val_error, ev.normalized_cost],
                test_accuracy: ev.test_accuracy,
                failed: false,
                eval_seconds,
            },
            outcome => {
                match outcome {
                    Err(e) => log::warn!("evaluation of {arch} failed: {e}"),
                    Ok(_) => log::warn!("evaluation of {arch} returned non-finite objectives"),
                }
                Observation {
                    config: arch,
                    objectives: [1.0, 1.0],
                    test_accuracy: 0.0,
                    failed: true,
                    eval_seconds,
                }
            }
        };
        log::debug!(
            "round {round}: {arch} -> ({:.4}, {:.4})",
            obs.objectives[0],
            obs.objectives[1]
        );
        front.insert(obs.clone());
        history.push(obs);
        hv_trace.push(hypervolume(&front.points(), cfg.reference));
    }

    Ok(SearchOutcome { reference: cfg.reference, front, history, hv_trace })
}
