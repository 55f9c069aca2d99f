//! Multi-worker trainer with asynchronous gradient application.
//!
//! Workers pull minibatches from a shared queue, compute gradients against a
//! snapshot of the parameters taken at the start of the minibatch, and apply
//! them under a write lock. The order in which updates land is unspecified,
//! so results can differ between runs; the synchronous [`super::train`] is
//! the deterministic reference.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::RwLock;

use rand::seq::SliceRandom;

use crate::error::{Result, SgapError};
use crate::propagation::MessageStack;

use super::mlp::loss_and_grads_rows;
use super::train::{seeded_rng, EarlyStopper, SplitData, DROPOUT_STREAM};
use super::{
    Adam, DropoutMasks, EpochRecord, MessageAggregatorKind, ModelParams, Splits, TrainConfig,
    TrainedModel,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AsyncOptions {
    pub workers: usize,
    pub batch_size: usize,
}

impl Default for AsyncOptions {
    fn default() -> Self {
        AsyncOptions {
            workers: 2,
            batch_size: 64,
        }
    }
}

struct Shared {
    params: ModelParams,
    adam: Adam,
}

pub fn train_async(
    stack: &MessageStack,
    kind: MessageAggregatorKind,
    labels: &[usize],
    splits: &Splits,
    params_init: ModelParams,
    cfg: &TrainConfig,
    opts: AsyncOptions,
) -> Result<TrainedModel> {
    cfg.validate()?;
    if opts.workers == 0 || opts.batch_size == 0 {
        return Err(SgapError::Parameter(
            "async trainer needs workers >= 1 and batch_size >= 1".into(),
        ));
    }
    let data = SplitData::new(stack, labels, splits)?;
    let adam = Adam::new(&params_init, cfg.learning_rate, cfg.adam_betas, cfg.adam_eps);
    let shared = RwLock::new(Shared {
        params: params_init,
        adam,
    });
    let mut order_rng = seeded_rng(cfg.seed, DROPOUT_STREAM + 1);
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut log = Vec::new();
    let n_train = data.train_labels.len();

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..n_train).collect();
        order.shuffle(&mut order_rng);
        let batches: Vec<Vec<usize>> = order.chunks(opts.batch_size).map(<[usize]>::to_vec).collect();
        let next = AtomicUsize::new(0);
        let loss_sum = RwLock::new((0.0f64, 0usize));
        let failed = AtomicUsize::new(0);

        std::thread::scope(|scope| {
            for _ in 0..opts.workers {
                scope.spawn(|| loop {
                    let b = next.fetch_add(1, Ordering::SeqCst);
                    if b >= batches.len() || failed.load(Ordering::SeqCst) > 0 {
                        break;
                    }
                    let idx = &batches[b];
                    let snapshot = shared.read().expect("lock poisoned").params.clone();
                    let sub = data.train_stack.select_rows(idx);
                    let sub_labels: Vec<usize> = idx.iter().map(|&i| data.train_labels[i]).collect();
                    let mut rng = seeded_rng(cfg.seed ^ ((epoch as u64) << 32) ^ b as u64, DROPOUT_STREAM);
                    let masks = (snapshot.dropout > 0.0 && snapshot.layers.len() > 1)
                        .then(|| DropoutMasks::sample(&snapshot, idx.len(), &mut rng));
                    match loss_and_grads_rows(&snapshot, &sub, kind, &sub_labels, cfg.weight_decay, masks.as_ref()) {
                        Ok((loss, grads)) if loss.is_finite() => {
                            let mut guard = shared.write().expect("lock poisoned");
                            let Shared { params, adam } = &mut *guard;
                            adam.step(params, &grads);
                            drop(guard);
                            let mut ls = loss_sum.write().expect("lock poisoned");
                            ls.0 += loss * idx.len() as f64;
                            ls.1 += idx.len();
                        }
                        _ => {
                            failed.fetch_add(1, Ordering::SeqCst);
                        }
                    }
                });
            }
        });

        let params = shared.read().expect("lock poisoned").params.clone();
        if failed.load(Ordering::SeqCst) > 0 || !params.is_finite() {
            return Err(SgapError::Training {
                last_finite_epoch: epoch - 1,
            });
        }
        let (ls, cnt) = *loss_sum.read().expect("lock poisoned");
        let val_acc = data.val_accuracy(&params, kind)?;
        log.push(EpochRecord {
            epoch,
            train_loss: ls / cnt.max(1) as f64,
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
