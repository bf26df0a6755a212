//! Neural building blocks: embeddings, linear maps, LSTM cells, attention,
//! positional encoding, position-wise feed-forward and layer normalization.
//!
//! Layers hold only [`ParamId`](crate::tensor::ParamId) handles; the values
//! live in a [`ParamStore`](crate::tensor::ParamStore) that is passed to every
//! forward call alongside the [`Graph`](crate::tensor::Graph) being built.

mod attention;
mod dense;
mod lstm;
mod norm;

pub use attention::{
    multi_head_attention, scaled_dot_attention, AttentionMask, AttentionOutput, MultiHeadAttention, MASKED_SCORE,
};
pub use dense::{Embedding, Linear};
pub use lstm::{bilstm_forward, lstm_cell_step, BiLstmOutput, LstmCellParams, LstmState};
pub use norm::{positional_encoding, FeedForward, FfnActivation, LayerNorm, LAYER_NORM_EPS};

/// Weight init bound: entries are drawn from U(-1/√fan_in, 1/√fan_in).
pub fn init_bound(fan_in: usize) -> f64 {
    1.0 / (fan_in.max(1) as f64).sqrt()
}
