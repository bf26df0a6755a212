//! Teacher-forced cross-entropy training with Adam, validation-based early
//! stopping and binary checkpoints.

mod adam;
mod checkpoint;
mod early_stop;
mod protocol;
mod trainer;

pub use adam::{clip_grad_norm, AdamState, DEFAULT_LR};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, FORMAT_VERSION, MAGIC,
};
pub use early_stop::{EarlyStopState, StopDecision, DEFAULT_PATIENCE, MIN_DELTA};
pub use protocol::{prepare_data, translate_sentences, DataConfig, PreparedData, VALIDATION_FRACTION};
pub use trainer::{batch_loss, cross_entropy_loss, evaluate_loss, fit, train_epoch, EpochLog, FitReport, TrainConfig};
