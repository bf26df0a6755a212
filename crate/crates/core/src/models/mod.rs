//! Sequence-to-sequence models: the Bi-LSTM/attention Mini-Former and the
//! Transformer baseline it is compared against.

mod config;
mod miniformer;
mod transformer;

use crate::data::{Batch, EOS};
use crate::error::Result;
use crate::tensor::{Graph, ParamStore, Var};

pub use config::{MiniFormerConfig, ModelConfig, ModelKind, TransformerConfig};
pub use miniformer::{AttentionTrace, DecodeStep, EncoderLayer, EncoderOutput, LearnableInitState, MiniFormer};
pub use transformer::{DecoderBlock, EncoderBlock, Transformer};

/// Behaviour shared by both architectures.
pub trait Seq2Seq {
    fn store(&self) -> &ParamStore;

    fn store_mut(&mut self) -> &mut ParamStore;

    fn vocab_tgt(&self) -> usize;

    /// Next-token logits `[batch, tgt_len - 1, vocab_tgt]`: position `t`
    /// sees gold target tokens `0..=t` and predicts token `t + 1`.
    fn forward_teacher_forced(&self, g: &mut Graph, batch: &Batch) -> Result<Var>;

    /// Greedy decoding of several sources at once; each output stops
    /// before EOS or after `max_len` tokens.
    fn greedy_decode_batch(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>>;
}

/// Greedy decoding of a single source sentence.
pub fn greedy_decode<M: Seq2Seq + ?Sized>(model: &M, src: &[usize], max_len: usize) -> Result<Vec<usize>> {
    let mut out = model.greedy_decode_batch(&[src.to_vec()], max_len)?;
    Ok(out.pop().unwrap_or_default())
}

/// Index of the largest entry; the lowest index wins ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Shared bookkeeping for batched greedy decoding.
pub(crate) struct GreedyState {
    pub outputs: Vec<Vec<usize>>,
    pub done: Vec<bool>,
}

impl GreedyState {
    pub fn new(batch: usize) -> Self {
        GreedyState {
            outputs: vec![Vec::new(); batch],
            done: vec![false; batch],
        }
    }

    /// Records the argmax of each logits row; returns the chosen ids.
    pub fn push(&mut self, logits: &[f64], vocab: usize) -> Vec<usize> {
        let mut chosen = Vec::with_capacity(self.done.len());
        for (b, row) in logits.chunks(vocab).enumerate() {
            let tok = argmax(row);
            if !self.done[b] {
                if tok == EOS {
                    self.done[b] = true;
                } else {
                    self.outputs[b].push(tok);
                }
            }
            chosen.push(tok);
        }
        chosen
    }

    pub fn finished(&self) -> bool {
        self.done.iter().all(|&d| d)
    }
}

/// Parameter count with a per-submodule breakdown.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    pub breakdown: Vec<(String, usize)>,
}

pub fn count_params<M: Seq2Seq + ?Sized>(model: &M) -> ParamCount {
    let store = model.store();
    ParamCount {
        total: store.numel(),
        breakdown: store.breakdown(1),
    }
}

/// Either architecture behind one type, as stored in checkpoints.
#[derive(Clone, Debug)]
pub enum Model {
    MiniFormer(MiniFormer),
    Transformer(Transformer),
}

impl Model {
    pub fn new(config: &ModelConfig, seed: u64) -> Result<Self> {
        Ok(match config {
            ModelConfig::MiniFormer(c) => Model::MiniFormer(MiniFormer::new(c.clone(), seed)?),
            ModelConfig::Transformer(c) => Model::Transformer(Transformer::new(c.clone(), seed)?),
        })
    }

    pub fn config(&self) -> ModelConfig {
        match self {
            Model::MiniFormer(m) => ModelConfig::MiniFormer(m.config.clone()),
            Model::Transformer(m) => ModelConfig::Transformer(m.config.clone()),
        }
    }

    fn inner(&self) -> &dyn Seq2Seq {
        match self {
            Model::MiniFormer(m) => m,
            Model::Transformer(m) => m,
        }
    }
}

impl Seq2Seq for Model {
    fn store(&self) -> &ParamStore {
        self.inner().store()
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        match self {
            Model::MiniFormer(m) => m.store_mut(),
            Model::Transformer(m) => m.store_mut(),
        }
    }

    fn vocab_tgt(&self) -> usize {
        self.inner().vocab_tgt()
    }

    fn forward_teacher_forced(&self, g: &mut Graph, batch: &Batch) -> Result<Var> {
        self.inner().forward_teacher_forced(g, batch)
    }

    fn greedy_decode_batch(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        self.inner().greedy_decode_batch(sources, max_len)
    }
}
