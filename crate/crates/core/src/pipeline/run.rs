use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Result, SgapError};
use crate::matrix::Matrix;
use crate::model::{
    accuracy, combine_messages, gate_heatmap, predict, train, train_async, AsyncOptions, HeatmapRow,
    MessageAggregatorKind, ModelParams, TrainConfig, TrainedModel,
};
use crate::operator::{build_operator_with, OperatorOptions};
use crate::propagation::{propagate, MessageStack, PropagateOptions, PropagationCache};

use super::arch::{canonicalize, ArchitectureConfig};
use super::cost::{CostModel, CostScope};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WallTimes {
    pub pre: f64,
    pub train: f64,
    pub post: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub config: ArchitectureConfig,
    /// `1 −` validation accuracy of the final (post-processed) predictions.
    pub val_error: f64,
    pub test_accuracy: f64,
    /// MACs under the run's cost scope.
    pub inference_cost: u64,
    pub normalized_cost: f64,
    pub best_epoch: usize,
    pub epochs_run: usize,
    /// Seconds per stage; left out of byte-reproducible outputs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_times: Option<WallTimes>,
    /// Mean adaptive gate weight per step, by degree bucket.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate_heatmap: Option<Vec<HeatmapRow>>,
}

/// Execution knobs that do not change what is computed (except
/// `async_train`, whose update order is unspecified).
#[derive(Clone, Copy, Debug, Default)]
pub struct RunContext<'a> {
    pub cache: Option<&'a PropagationCache>,
    pub propagate: PropagateOptions,
    pub operator: OperatorOptions,
    pub cost_scope: CostScope,
    pub async_train: Option<AsyncOptions>,
    /// Precomputed design-space cost bounds for this dataset and scope.
    pub cost_bounds: Option<(u64, u64)>,
}

#[derive(Clone, Debug)]
pub struct SgapRun {
    pub eval: EvalResult,
    pub model: TrainedModel,
    /// Stage-2 soft predictions, one row per node.
    pub stage2_predictions: Matrix,
    /// Post-processed predictions `m^{K_post}`.
    pub final_predictions: Matrix,
}

/// The cost model for a dataset: operator non-zeros counted as `nnz(A) + n`.
pub fn cost_model(data: &Dataset, cfg: &TrainConfig, scope: CostScope) -> CostModel {
    CostModel {
        nodes: data.num_nodes() as u64,
        nnz: (data.graph.nnz() + data.num_nodes()) as u64,
        feat_dim: data.feat_dim() as u64,
        classes: data.num_classes as u64,
        hidden: cfg.hidden_dim as u64,
        scope,
    }
}

/// Runs pre-processing, training and post-processing for one architecture.
pub fn run_sgap(
    data: &Dataset,
    arch: &ArchitectureConfig,
    cfg: &TrainConfig,
    ctx: &RunContext<'_>,
) -> Result<SgapRun> {
    let arch = canonicalize(*arch)?;
    cfg.validate()?;
    if data.splits.test.is_empty() {
        return Err(SgapError::EmptyMask("test split is empty"));
    }

    // Stage 1: feature propagation, independent of model parameters.
    let t0 = Instant::now();
    let stack = match arch.ga_pre.operator_kind() {
        None => MessageStack::new(vec![data.features.clone()])?,
        Some(kind) => {
            let op = build_operator_with(&data.graph, kind, ctx.operator)?;
            match ctx.cache {
                Some(cache) => cache.get_or_compute(
                    data.fingerprint(),
                    &op,
                    &data.features,
                    arch.k_pre,
                    ctx.propagate,
                )?,
                None => propagate(&op, &data.features, arch.k_pre, ctx.propagate)?,
            }
        }
    };
    let t_pre = t0.elapsed().as_secs_f64();

    // Stage 2: combine messages and train the MLP.
    let t1 = Instant::now();
    let mut init_rng = crate::model_rng(cfg.seed, crate::model::INIT_STREAM);
    let params = ModelParams::init(
        arch.ma,
        data.feat_dim(),
        arch.k_pre,
        arch.k_trans,
        data.num_classes,
        cfg.hidden_dim,
        cfg.dropout,
        cfg.weighted_beta,
        &mut init_rng,
    )?;
    let model = match ctx.async_train {
        Some(opts) => train_async(&stack, arch.ma, &data.labels, &data.splits, params, cfg, opts)?,
        None => train(&stack, arch.ma, &data.labels, &data.splits, params, cfg)?,
    };
    let stage2 = predict(&model.params, arch.ma, &stack)?;
    let t_train = t1.elapsed().as_secs_f64();

    // Stage 3: propagate soft predictions.
    let t2 = Instant::now();
    let final_predictions = match arch.ga_post.operator_kind() {
        None => stage2.clone(),
        Some(kind) => {
            let op = build_operator_with(&data.graph, kind, ctx.operator)?;
            propagate(&op, &stage2, arch.k_post, ctx.propagate)?.last().clone()
        }
    };
    let t_post = t2.elapsed().as_secs_f64();

    let val_acc = accuracy(&final_predictions, &data.labels, &data.splits.val)?;
    let test_accuracy = accuracy(&final_predictions, &data.labels, &data.splits.test)?;

    let cm = cost_model(data, cfg, ctx.cost_scope);
    let bounds = ctx.cost_bounds.unwrap_or_else(|| cm.bounds());
    let gate_heatmap = if arch.ma == MessageAggregatorKind::Adaptive {
        let comb = combine_messages(arch.ma, &stack, &model.params)?;
        let degrees: Vec<usize> = (0..data.num_nodes()).map(|v| data.graph.degree(v)).collect();
        comb.gates.map(|g| gate_heatmap(&g, &degrees))
    } else {
        None
    };

    let eval = EvalResult {
        config: arch,
        val_error: 1.0 - val_acc,
        test_accuracy,
        inference_cost: cm.cost(&arch),
        normalized_cost: cm.normalized(&arch, bounds),
        best_epoch: model.best_epoch,
        epochs_run: model.epochs_run(),
        wall_times: Some(WallTimes {
            pre: t_pre,
            train: t_train,
            post: t_post,
        }),
        gate_heatmap,
    };
    Ok(SgapRun {
        eval,
        model,
        stage2_predictions: stage2,
        final_predictions,
    })
}
