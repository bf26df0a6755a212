//! Neural machine translation with a Bi-LSTM encoder and attention decoder
//! ("Mini-Former"), a matched Transformer baseline, and the BLEU/ROUGE
//! evaluation suite used to compare them.
//!
//! Everything runs on [`tensor`], a small define-by-run reverse-mode
//! autodiff engine over `f64` tensors.

pub mod data;
pub mod error;
pub mod layers;
pub mod metrics;
pub mod models;
pub mod tensor;
pub mod training;

pub use error::{Error, Result};
