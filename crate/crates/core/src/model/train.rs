use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SgapError};
use crate::graph::ByteReader;
use crate::matrix::Matrix;
use crate::propagation::MessageStack;

use super::mlp::loss_and_grads_rows;
use super::{predict, Adam, DropoutMasks, Layer, MessageAggregatorKind, ModelParams};

pub const WEIGHTS_MAGIC: &[u8; 6] = b"SGAPW1";

/// Stream ids for the seeded generator: parameter init and dropout draw from
/// independent streams of the same seed.
pub(crate) const INIT_STREAM: u64 = 0;
pub(crate) const DROPOUT_STREAM: u64 = 1;

pub(crate) fn seeded_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    crate::model_rng(seed, stream)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub seed: u64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub weighted_beta: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-2,
            max_epochs: 400,
            patience: 20,
            weight_decay: 5e-4,
            seed: 0,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            hidden_dim: 64,
            dropout: 0.5,
            weighted_beta: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(SgapError::Validation(m));
        if self.max_epochs < 1 {
            return err("max_epochs must be at least 1".into());
        }
        if self.patience < 1 {
            return err("patience must be at least 1".into());
        }
        if self.learning_rate.is_nan() || self.learning_rate <= 0.0 {
            return err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return err(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if !(self.weighted_beta > 0.0 && self.weighted_beta < 1.0) {
            return err(format!("weighted_beta must lie in (0, 1), got {}", self.weighted_beta));
        }
        if self.hidden_dim == 0 {
            return err("hidden_dim must be positive".into());
        }
        if self.weight_decay < 0.0 {
            return err("weight_decay must be non-negative".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Splits {
    /// Checks that the three index lists are disjoint, duplicate-free and in range.
    pub fn validate(&self, num_nodes: usize) -> Result<()> {
        let mut seen = HashSet::new();
        for (name, idx) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &v in idx {
                if v >= num_nodes {
                    return Err(SgapError::Validation(format!(
                        "{name} split index {v} out of range for {num_nodes} nodes"
                    )));
                }
                if !seen.insert(v) {
                    return Err(SgapError::Validation(format!(
                        "node {v} appears twice across splits (second time in {name})"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainedModel {
    /// Parameters of the best validation epoch.
    pub params: ModelParams,
    pub best_val_accuracy: f64,
    pub best_epoch: usize,
    pub log: Vec<EpochRecord>,
}

impl TrainedModel {
    pub fn epochs_run(&self) -> usize {
        self.log.len()
    }

    pub fn log_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,val_acc\n");
        for r in &self.log {
            s.push_str(&format!("{},{},{}\n", r.epoch, r.train_loss, r.val_acc));
        }
        s
    }

    pub fn write_log_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.log_csv()).map_err(|e| SgapError::io(path, e))
    }

    pub fn write_weights(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| SgapError::io(path, e))?;
        f.write_all(&params_to_bytes(&self.params))
            .map_err(|e| SgapError::io(path, e))
    }
}

/// `SGAPW1` layout (little-endian): magic, u64 hidden_dim, f64 dropout,
/// f64 weighted_beta, u64 layer count, then per layer u64 rows, u64 cols,
/// `rows·cols` weights and `cols` biases; finally u8 gate flag and, when set,
/// u64 length plus the gate values.
pub fn params_to_bytes(p: &ModelParams) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(WEIGHTS_MAGIC);
    out.extend_from_slice(&(p.hidden_dim as u64).to_le_bytes());
    out.extend_from_slice(&p.dropout.to_le_bytes());
    out.extend_from_slice(&p.weighted_beta.to_le_bytes());
    out.extend_from_slice(&(p.layers.len() as u64).to_le_bytes());
    for l in &p.layers {
        let (r, c) = l.weight.shape();
        out.extend_from_slice(&(r as u64).to_le_bytes());
        out.extend_from_slice(&(c as u64).to_le_bytes());
        for v in l.weight.as_slice().iter().chain(&l.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    match &p.gate_s {
        Some(s) => {
            out.push(1);
            out.extend_from_slice(&(s.len() as u64).to_le_bytes());
            for v in s {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        None => out.push(0),
    }
    out
}

pub fn params_from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let bad = || SgapError::Format {
        path: "<weights>".into(),
        message: "truncated or malformed SGAPW1 data".into(),
    };
    let mut r = ByteReader::new(bytes);
    if r.take(6) != Some(&WEIGHTS_MAGIC[..]) {
        return Err(bad());
    }
    let hidden_dim = r.u64().ok_or_else(bad)? as usize;
    let dropout = r.f64().ok_or_else(bad)?;
    let weighted_beta = r.f64().ok_or_else(bad)?;
    let nl = r.u64().ok_or_else(bad)? as usize;
    let mut layers = Vec::with_capacity(nl.min(64));
    for _ in 0..nl {
        let rows = r.u64().ok_or_else(bad)? as usize;
        let cols = r.u64().ok_or_else(bad)? as usize;
        let cnt = rows.checked_mul(cols).ok_or_else(bad)?;
        if r.remaining() < cnt.saturating_add(cols).saturating_mul(8) {
            return Err(bad());
        }
        let w = (0..cnt).map(|_| r.f64().unwrap()).collect();
        let bias = (0..cols).map(|_| r.f64().unwrap()).collect();
        layers.push(Layer {
            weight: Matrix::from_vec(rows, cols, w)?,
            bias,
        });
    }
    let gate_s = match r.u8().ok_or_else(bad)? {
        0 => None,
        1 => {
            let len = r.u64().ok_or_else(bad)? as usize;
            if r.remaining() != len.saturating_mul(8) {
                return Err(bad());
            }
            Some((0..len).map(|_| r.f64().unwrap()).collect())
        }
        _ => return Err(bad()),
    };
    if r.remaining() != 0 {
        return Err(bad());
    }
    Ok(ModelParams {
        layers,
        gate_s,
        hidden_dim,
        dropout,
        weighted_beta,
    })
}

/// Fraction of masked nodes whose argmax class (ties → smallest index)
/// equals the label.
pub fn accuracy(predictions: &Matrix, labels: &[usize], mask: &[usize]) -> Result<f64> {
    if mask.is_empty() {
        return Err(SgapError::EmptyMask("accuracy needs at least one node"));
    }
    let correct = mask
        .iter()
        .filter(|&&v| argmax(predictions.row(v)) == labels[v])
        .count();
    Ok(correct as f64 / mask.len() as f64)
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in row.iter().enumerate().skip(1) {
        if x > row[best] {
            best = i;
        }
    }
    best
}

fn accuracy_rows(predictions: &Matrix, labels: &[usize]) -> f64 {
    let correct = labels
        .iter()
        .enumerate()
        .filter(|&(v, &y)| argmax(predictions.row(v)) == y)
        .count();
    correct as f64 / labels.len() as f64
}

/// Early-stopping bookkeeping shared by the synchronous and async trainers.
pub(crate) struct EarlyStopper {
    pub best_val: f64,
    pub best_epoch: usize,
    pub best_params: Option<ModelParams>,
    patience: usize,
}

impl EarlyStopper {
    pub(crate) fn new(patience: usize) -> Self {
        EarlyStopper {
            best_val: f64::NEG_INFINITY,
            best_epoch: 0,
            best_params: None,
            patience,
        }
    }

    /// Records an epoch; returns `true` when training should stop.
    pub(crate) fn observe(&mut self, epoch: usize, val_acc: f64, params: &ModelParams) -> bool {
        if val_acc > self.best_val {
            self.best_val = val_acc;
            self.best_epoch = epoch;
            self.best_params = Some(params.clone());
            false
        } else {
            epoch - self.best_epoch >= self.patience
        }
    }
}

/// Labeled sub-problems extracted once per training run.
pub(crate) struct SplitData {
    pub train_stack: MessageStack,
    pub train_labels: Vec<usize>,
    pub val_stack: MessageStack,
    pub val_labels: Vec<usize>,
}

impl SplitData {
    pub(crate) fn new(stack: &MessageStack, labels: &[usize], splits: &Splits) -> Result<Self> {
        if labels.len() != stack.num_nodes() {
            return Err(SgapError::dim(
                format!("{} labels", stack.num_nodes()),
                labels.len(),
            ));
        }
        splits.validate(stack.num_nodes())?;
        if splits.train.is_empty() {
            return Err(SgapError::EmptyMask("training split is empty"));
        }
        if splits.val.is_empty() {
            return Err(SgapError::EmptyMask("validation split is empty"));
        }
        Ok(SplitData {
            train_stack: stack.select_rows(&splits.train),
            train_labels: splits.train.iter().map(|&v| labels[v]).collect(),
            val_stack: stack.select_rows(&splits.val),
            val_labels: splits.val.iter().map(|&v| labels[v]).collect(),
        })
    }

    pub(crate) fn val_accuracy(&self, params: &ModelParams, kind: MessageAggregatorKind) -> Result<f64> {
        let p = predict(params, kind, &self.val_stack)?;
        Ok(accuracy_rows(&p, &self.val_labels))
    }
}

/// Full-batch Adam training with early stopping on validation accuracy.
/// Returns the parameters of the best validation epoch.
pub fn train(
    stack: &MessageStack,
    kind: MessageAggregatorKind,
    labels: &[usize],
    splits: &Splits,
    params_init: ModelParams,
    cfg: &TrainConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    let data = SplitData::new(stack, labels, splits)?;
    let mut params = params_init;
    let mut adam = Adam::new(&params, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps);
    let mut rng = seeded_rng(cfg.seed, DROPOUT_STREAM);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut log = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let masks = (params.dropout > 0.0 && params.layers.len() > 1)
            .then(|| DropoutMasks::sample(&params, data.train_labels.len(), &mut rng));
        let (loss, grads) = loss_and_grads_rows(
            &params,
            &data.train_stack,
            kind,
            &data.train_labels,
            cfg.weight_decay,
            masks.as_ref(),
        )?;
        if !loss.is_finite() {
            return Err(SgapError::Training {
                last_finite_epoch: epoch - 1,
            });
        }
        adam.step(&mut params, &grads);
        if !params.is_finite() {
            return Err(SgapError::Training {
                last_finite_epoch: epoch - 1,
            });
        }
        let val_acc = data.val_accuracy(&params, kind)?;
        log.push(EpochRecord {
            epoch,
            train_loss: loss,
            val_acc,
        });
        if stopper.observe(epoch, val_acc, &params) {
            break;
        }
    }
    Ok(TrainedModel {
        params: stopper.best_params.expect("at least one epoch runs"),
        best_val_accuracy: stopper.best_val,
        best_epoch: stopper.best_epoch,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_tie_breaks_to_class_zero() {
        let p = Matrix::from_rows(&[vec![0.5, 0.5], vec![0.25, 0.75]]).unwrap();
        assert_eq!(accuracy(&p, &[0, 1], &[0, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&p, &[1, 1], &[0]).unwrap(), 0.0);
        assert!(matches!(accuracy(&p, &[0, 1], &[]), Err(SgapError::EmptyMask(_))));
    }

    #[test]
    fn splits_must_be_disjoint() {
        let s = Splits {
            train: vec![0, 1],
            val: vec![1],
            test: vec![2],
        };
        assert!(s.validate(3).is_err());
        let s = Splits {
            train: vec![0],
            val: vec![1],
            test: vec![5],
        };
        assert!(s.validate(3).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            patience: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let cfg: TrainConfig = serde_json::from_str(r#"{"learning_rate":0.05,"seed":9}"#).unwrap();
        assert_eq!(cfg.max_epochs, 400);
        assert_eq!(cfg.seed, 9);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"lr":1}"#).is_err());
    }

    #[test]
    fn weights_roundtrip() {
        let mut rng = seeded_rng(5, INIT_STREAM);
        let p = ModelParams::init(MessageAggregatorKind::Adaptive, 3, 2, 2, 4, 5, 0.3, 0.25, &mut rng)
            .unwrap();
        let bytes = params_to_bytes(&p);
        assert_eq!(&bytes[..6], b"SGAPW1");
        assert_eq!(params_from_bytes(&bytes).unwrap(), p);
        assert!(params_from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    #[test]
    fn stopper_counts_patience_from_best_epoch() {
        let p = ModelParams {
            layers: vec![],
            gate_s: None,
            hidden_dim: 1,
            dropout: 0.0,
            weighted_beta: 0.5,
        };
        let mut s = EarlyStopper::new(3);
        assert!(!s.observe(1, 0.5, &p));
        assert!(!s.observe(2, 0.6, &p));
        assert!(!s.observe(3, 0.6, &p));
        assert!(!s.observe(4, 0.6, &p));
        assert!(s.observe(5, 0.6, &p));
        assert_eq!(s.best_epoch, 2);
    }
}
