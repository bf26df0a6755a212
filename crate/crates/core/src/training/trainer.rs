use std::fmt;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{clip_grad_norm, AdamState, EarlyStopState, StopDecision, DEFAULT_LR, DEFAULT_PATIENCE};
use crate::data::Batch;
use crate::error::{contract, Error, Result};
use crate::models::Seq2Seq;
use crate::tensor::{Graph, Var};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Global gradient-norm cap; `None` disables clipping.
    pub clip_norm: Option<f64>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: DEFAULT_LR,
            batch_size: 32,
            max_epochs: 50,
            patience: DEFAULT_PATIENCE,
            clip_norm: None,
            seed: 0,
        }
    }
}

/// Mean of `−log softmax(logits)[gold]` over positions where `mask` holds.
pub fn cross_entropy_loss(g: &mut Graph, logits: Var, gold: &[usize], mask: &[bool]) -> Result<Var> {
    g.cross_entropy(logits, gold, mask)
}

/// Teacher-forced loss of one batch.
pub fn batch_loss<M: Seq2Seq + ?Sized>(g: &mut Graph, model: &M, batch: &Batch) -> Result<Var> {
    let logits = model.forward_teacher_forced(g, batch)?;
    let (gold, mask) = batch.gold();
    cross_entropy_loss(g, logits, &gold, &mask)
}

fn shuffle_seed(seed: u64, epoch: usize) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64)
}

/// One pass over `batches` in an order shuffled by `(seed, epoch)`, with an
/// Adam step per batch. Returns the token-weighted mean loss.
pub fn train_epoch<M: Seq2Seq + ?Sized>(
    model: &mut M,
    batches: &[Batch],
    adam: &mut AdamState,
    seed: u64,
    epoch: usize,
    clip_norm: Option<f64>,
) -> Result<f64> {
    if batches.is_empty() {
        return Err(contract("training epoch needs at least one batch"));
    }
    let mut order: Vec<usize> = (0..batches.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed(seed, epoch)));
    let mut total = 0.0;
    let mut tokens = 0usize;
    for (step, &i) in order.iter().enumerate() {
        let batch = &batches[i];
        let mut g = Graph::new();
        let loss = batch_loss(&mut g, model, batch)?;
        let value = g.value(loss).item();
        g.backward(loss)?;
        g.accumulate_param_grads(model.store_mut());
        let norm = match clip_norm {
            Some(c) => clip_grad_norm(model.store_mut(), c),
            None => model.store().grad_norm(),
        };
        if !value.is_finite() || !norm.is_finite() {
            return Err(Error::Divergence(format!(
                "loss {value} at epoch {epoch}, step {step} (batch {i}), gradient norm {norm}"
            )));
        }
        adam.step(model.store_mut())?;
        let n = batch.target_tokens();
        total += value * n as f64;
        tokens += n;
    }
    Ok(total / tokens as f64)
}

/// Token-weighted mean loss without updating anything.
pub fn evaluate_loss<M: Seq2Seq + ?Sized>(model: &M, batches: &[Batch]) -> Result<f64> {
    if batches.is_empty() {
        return Err(contract("evaluation needs at least one batch"));
    }
    let mut total = 0.0;
    let mut tokens = 0usize;
    for batch in batches {
        let mut g = Graph::inference();
        let loss = batch_loss(&mut g, model, batch)?;
        let n = batch.target_tokens();
        total += g.value(loss).item() * n as f64;
        tokens += n;
    }
    Ok(total / tokens as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

impl fmt::Display for EpochLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "epoch={} train_loss={:.6} val_loss={:.6} seconds={:.3}",
            self.epoch, self.train_loss, self.val_loss, self.seconds
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitReport {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub initial_val_loss: f64,
    pub stopped_early: bool,
}

/// Trains until early stopping or `max_epochs`, then restores the model and
/// optimizer to the epoch with the lowest validation loss.
///
/// `on_epoch` sees every epoch log as it is produced.
pub fn fit<M: Seq2Seq + Clone>(
    model: &mut M,
    adam: &mut AdamState,
    train: &[Batch],
    val: &[Batch],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<FitReport> {
    let initial_val_loss = evaluate_loss(model, val)?;
    let mut stop = EarlyStopState::new(config.patience);
    stop.check(0, initial_val_loss);
    let mut best = (model.clone(), adam.clone());
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    for epoch in 1..=config.max_epochs {
        let start = Instant::now();
        let train_loss = train_epoch(model, train, adam, config.seed, epoch, config.clip_norm)?;
        let val_loss = evaluate_loss(model, val)?;
        let log = EpochLog {
            epoch,
            train_loss,
            val_loss,
            seconds: start.elapsed().as_secs_f64(),
        };
        on_epoch(&log);
        epochs.push(log);
        match stop.check(epoch, val_loss) {
            StopDecision::Improved => best = (model.clone(), adam.clone()),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                stopped_early = true;
                break;
            }
        }
    }
    (*model, *adam) = best;
    Ok(FitReport {
        epochs,
        best_epoch: stop.best_epoch,
        best_val_loss: stop.best_val_loss,
        initial_val_loss,
        stopped_early,
    })
}
