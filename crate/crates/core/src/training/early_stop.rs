/// Smallest validation-loss drop that counts as an improvement.
pub const MIN_DELTA: f64 = 1e-4;
pub const DEFAULT_PATIENCE: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    /// New best; the caller should snapshot the model.
    Improved,
    Continue,
    Stop,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopState {
    pub best_val_loss: f64,
    pub best_epoch: usize,
    pub epochs_since_improvement: usize,
    pub patience: usize,
    pub min_delta: f64,
}

impl EarlyStopState {
    pub fn new(patience: usize) -> Self {
        EarlyStopState {
            best_val_loss: f64::INFINITY,
            best_epoch: 0,
            epochs_since_improvement: 0,
            patience,
            min_delta: MIN_DELTA,
        }
    }

    /// Records the validation loss of `epoch` (1-based).
    pub fn check(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best_val_loss - self.min_delta {
            self.best_val_loss = val_loss;
            self.best_epoch = epoch;
            self.epochs_since_improvement = 0;
            return StopDecision::Improved;
        }
        self.epochs_since_improvement += 1;
        if self.epochs_since_improvement >= self.patience {
            StopDecision::Stop
        } else {
            StopDecision::Continue
        }
    }
}
