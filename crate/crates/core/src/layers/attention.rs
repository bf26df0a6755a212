use rand::Rng;

use super::Linear;
use crate::error::{config, Error, Result};
use crate::tensor::{Graph, ParamStore, Tensor, Var};

/// Score assigned to masked positions before the softmax.
pub const MASKED_SCORE: f64 = -1e9;

/// Which key positions each query may attend to, shape `[batch, queries, keys]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AttentionMask {
    batch: usize,
    queries: usize,
    keys: usize,
    keep: Vec<bool>,
}

impl AttentionMask {
    pub fn new(batch: usize, queries: usize, keys: usize, keep: Vec<bool>) -> Result<Self> {
        if keep.len() != batch * queries * keys {
            return Err(Error::Dimension {
                op: "attention_mask",
                lhs: vec![batch, queries, keys],
                rhs: vec![keep.len()],
            });
        }
        Ok(AttentionMask {
            batch,
            queries,
            keys,
            keep,
        })
    }

    /// Key `j` is visible to every query of row `b` iff `j < lengths[b]`.
    pub fn padding(lengths: &[usize], queries: usize, keys: usize) -> Self {
        let keep = lengths
            .iter()
            .flat_map(|&len| (0..queries).flat_map(move |_| (0..keys).map(move |j| j < len)))
            .collect();
        AttentionMask {
            batch: lengths.len(),
            queries,
            keys,
            keep,
        }
    }

    /// Query `i` sees keys `0..=i`.
    pub fn causal(batch: usize, len: usize) -> Self {
        let keep = (0..batch)
            .flat_map(|_| (0..len).flat_map(move |i| (0..len).map(move |j| j <= i)))
            .collect();
        AttentionMask {
            batch,
            queries: len,
            keys: len,
            keep,
        }
    }

    pub fn and(&self, other: &AttentionMask) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::Dimension {
                op: "attention_mask",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let keep = self.keep.iter().zip(&other.keep).map(|(a, b)| *a && *b).collect();
        Ok(AttentionMask { keep, ..*self })
    }

    /// Repeats each batch row `heads` times, matching a `[batch·heads, ...]` layout.
    pub fn repeat_heads(&self, heads: usize) -> Self {
        let block = self.queries * self.keys;
        let keep = self
            .keep
            .chunks(block)
            .flat_map(|row| std::iter::repeat_n(row, heads).flatten().copied())
            .collect();
        AttentionMask {
            batch: self.batch * heads,
            keep,
            ..*self
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.batch, self.queries, self.keys]
    }

    pub fn keep(&self) -> &[bool] {
        &self.keep
    }

    /// Additive score bias: 0 where kept, [`MASKED_SCORE`] elsewhere.
    pub fn bias(&self) -> Tensor {
        let data = self.keep.iter().map(|&k| if k { 0.0 } else { MASKED_SCORE }).collect();
        Tensor::new(&self.shape(), data).expect("mask shape")
    }
}

/// Attended values `[batch, queries, d_v]` and weights `[batch, queries, keys]`.
#[derive(Clone, Copy, Debug)]
pub struct AttentionOutput {
    pub context: Var,
    pub weights: Var,
}

/// `softmax(Q·Kᵀ/√d_k)·V` with masked scores pushed to [`MASKED_SCORE`].
pub fn scaled_dot_attention(
    g: &mut Graph,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<&AttentionMask>,
) -> Result<AttentionOutput> {
    let (qs, ks, vs) = (g.shape(q).to_vec(), g.shape(k).to_vec(), g.shape(v).to_vec());
    let ok = qs.len() == 3
        && ks.len() == 3
        && vs.len() == 3
        && qs[0] == ks[0]
        && ks[0] == vs[0]
        && qs[2] == ks[2]
        && ks[1] == vs[1];
    if !ok {
        return Err(Error::Dimension {
            op: "scaled_dot_attention",
            lhs: qs,
            rhs: ks,
        });
    }
    let d_k = qs[2];
    let kt = g.transpose(k)?;
    let raw = g.batch_matmul(q, kt)?;
    let mut scores = g.scale(raw, 1.0 / (d_k as f64).sqrt());
    if let Some(mask) = mask {
        let expected = [qs[0], qs[1], ks[1]];
        if mask.shape() != expected {
            return Err(Error::Dimension {
                op: "attention mask",
                lhs: expected.to_vec(),
                rhs: mask.shape().to_vec(),
            });
        }
        let bias = g.constant(mask.bias());
        scores = g.add(scores, bias)?;
    }
    let weights = g.softmax(scores)?;
    let context = g.batch_matmul(weights, v)?;
    Ok(AttentionOutput { context, weights })
}

/// Projections for `Concat(head_1..head_h)·W^O` with
/// `head_i = Attention(Q·W_i^Q, K·W_i^K, V·W_i^V)`.
///
/// The per-head projections are stored side by side in one
/// `[d_model, d_model]` matrix per role; head `i` owns columns
/// `i·d_head..(i+1)·d_head`.
#[derive(Clone, Debug)]
pub struct MultiHeadAttention {
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
    pub heads: usize,
    pub d_model: usize,
}

impl MultiHeadAttention {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, d_model: usize, heads: usize, rng: &mut R) -> Result<Self> {
        if heads == 0 || !d_model.is_multiple_of(heads) {
            return Err(config(format!("d_model {d_model} is not divisible by {heads} heads")));
        }
        Ok(MultiHeadAttention {
            query: Linear::new(store, &format!("{name}.W_Q"), d_model, d_model, true, rng)?,
            key: Linear::new(store, &format!("{name}.W_K"), d_model, d_model, true, rng)?,
            value: Linear::new(store, &format!("{name}.W_V"), d_model, d_model, true, rng)?,
            output: Linear::new(store, &format!("{name}.W_O"), d_model, d_model, true, rng)?,
            heads,
            d_model,
        })
    }

    pub fn d_head(&self) -> usize {
        self.d_model / self.heads
    }

    /// `[b, n, d_model]` -> `[b·h, n, d_head]`
    fn split_heads(&self, g: &mut Graph, x: Var) -> Result<Var> {
        let s = g.shape(x).to_vec();
        let (b, n) = (s[0], s[1]);
        let x = g.reshape(x, &[b, n, self.heads, self.d_head()])?;
        let x = g.permute(x, &[0, 2, 1, 3])?;
        g.reshape(x, &[b * self.heads, n, self.d_head()])
    }

    /// `[b·h, n, d_head]` -> `[b, n, d_model]`
    fn merge_heads(&self, g: &mut Graph, x: Var, b: usize) -> Result<Var> {
        let n = g.shape(x)[1];
        let x = g.reshape(x, &[b, self.heads, n, self.d_head()])?;
        let x = g.permute(x, &[0, 2, 1, 3])?;
        g.reshape(x, &[b, n, self.d_model])
    }
}

/// Multi-head attention of `q: [b,m,d_model]` over `k, v: [b,n,d_model]`.
pub fn multi_head_attention(
    g: &mut Graph,
    store: &ParamStore,
    params: &MultiHeadAttention,
    q: Var,
    k: Var,
    v: Var,
    mask: Option<&AttentionMask>,
) -> Result<Var> {
    if params.heads == 0 || !params.d_model.is_multiple_of(params.heads) {
        return Err(config(format!(
            "d_model {} is not divisible by {} heads",
            params.d_model, params.heads
        )));
    }
    let batch = g.shape(q)[0];
    let qp = params.query.forward(g, store, q)?;
    let kp = params.key.forward(g, store, k)?;
    let vp = params.value.forward(g, store, v)?;
    let qh = params.split_heads(g, qp)?;
    let kh = params.split_heads(g, kp)?;
    let vh = params.split_heads(g, vp)?;
    let mask = mask.map(|m| m.repeat_heads(params.heads));
    let attn = scaled_dot_attention(g, qh, kh, vh, mask.as_ref())?;
    let merged = params.merge_heads(g, attn.context, batch)?;
    params.output.forward(g, store, merged)
}
