use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::miniformer::check_target;
use super::{GreedyState, Seq2Seq, TransformerConfig};
use crate::data::{Batch, BOS};
use crate::error::Result;
use crate::layers::{
    multi_head_attention, positional_encoding, AttentionMask, Embedding, FeedForward, LayerNorm, Linear,
    MultiHeadAttention,
};
use crate::tensor::{Graph, ParamStore, Var};

/// Pre-norm encoder block: `x + SelfAttn(LN(x))`, then `x + FFN(LN(x))`.
#[derive(Clone, Debug)]
pub struct EncoderBlock {
    pub norm_attn: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub norm_ffn: LayerNorm,
    pub ffn: FeedForward,
}

/// Pre-norm decoder block with causal self-attention and cross-attention.
#[derive(Clone, Debug)]
pub struct DecoderBlock {
    pub norm_self: LayerNorm,
    pub self_attn: MultiHeadAttention,
    pub norm_cross: LayerNorm,
    pub cross_attn: MultiHeadAttention,
    pub norm_ffn: LayerNorm,
    pub ffn: FeedForward,
}

/// Encoder-decoder Transformer baseline with sinusoidal positions.
#[derive(Clone, Debug)]
pub struct Transformer {
    pub config: TransformerConfig,
    pub store: ParamStore,
    pub src_embed: Embedding,
    pub tgt_embed: Embedding,
    pub encoder: Vec<EncoderBlock>,
    pub encoder_norm: LayerNorm,
    pub decoder: Vec<DecoderBlock>,
    pub decoder_norm: LayerNorm,
    pub output: Linear,
}

impl Transformer {
    pub fn new(config: TransformerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (d, h, ff, act) = (config.d_model, config.n_heads, config.d_ff, config.ffn_activation);

        let src_embed = Embedding::new(&mut store, "src_embed", config.vocab_src, d, &mut rng)?;
        let tgt_embed = Embedding::new(&mut store, "tgt_embed", config.vocab_tgt, d, &mut rng)?;
        let mut encoder = Vec::with_capacity(config.n_layers_enc);
        for l in 0..config.n_layers_enc {
            let p = format!("encoder.{l}");
            encoder.push(EncoderBlock {
                norm_attn: LayerNorm::new(&mut store, &format!("{p}.norm_attn"), d)?,
                self_attn: MultiHeadAttention::new(&mut store, &format!("{p}.self_attn"), d, h, &mut rng)?,
                norm_ffn: LayerNorm::new(&mut store, &format!("{p}.norm_ffn"), d)?,
                ffn: FeedForward::new(&mut store, &format!("{p}.ffn"), d, ff, act, &mut rng)?,
            });
        }
        let encoder_norm = LayerNorm::new(&mut store, "encoder.norm", d)?;
        let mut decoder = Vec::with_capacity(config.n_layers_dec);
        for l in 0..config.n_layers_dec {
            let p = format!("decoder.{l}");
            decoder.push(DecoderBlock {
                norm_self: LayerNorm::new(&mut store, &format!("{p}.norm_self"), d)?,
                self_attn: MultiHeadAttention::new(&mut store, &format!("{p}.self_attn"), d, h, &mut rng)?,
                norm_cross: LayerNorm::new(&mut store, &format!("{p}.norm_cross"), d)?,
                cross_attn: MultiHeadAttention::new(&mut store, &format!("{p}.cross_attn"), d, h, &mut rng)?,
                norm_ffn: LayerNorm::new(&mut store, &format!("{p}.norm_ffn"), d)?,
                ffn: FeedForward::new(&mut store, &format!("{p}.ffn"), d, ff, act, &mut rng)?,
            });
        }
        let decoder_norm = LayerNorm::new(&mut store, "decoder.norm", d)?;
        let output = Linear::new(&mut store, "decoder.out", d, config.vocab_tgt, true, &mut rng)?;
        Ok(Transformer {
            config,
            store,
            src_embed,
            tgt_embed,
            encoder,
            encoder_norm,
            decoder,
            decoder_norm,
            output,
        })
    }

    /// `embed(ids)·√d_model + PE`, shape `[batch, len, d_model]`.
    fn embed(&self, g: &mut Graph, table: &Embedding, ids: &[usize], batch: usize, len: usize) -> Result<Var> {
        let d = self.config.d_model;
        let x = table.lookup(g, &self.store, ids, batch, len)?;
        let x = g.scale(x, (d as f64).sqrt());
        let pe = g.constant(positional_encoding(len, d)?);
        g.add(x, pe)
    }

    /// Encoder memory `[batch, src_len, d_model]`.
    pub fn encode(
        &self,
        g: &mut Graph,
        src_ids: &[usize],
        batch: usize,
        src_len: usize,
        lengths: &[usize],
    ) -> Result<Var> {
        let mut x = self.embed(g, &self.src_embed, src_ids, batch, src_len)?;
        let mask = AttentionMask::padding(lengths, src_len, src_len);
        for block in &self.encoder {
            let n = block.norm_attn.forward(g, &self.store, x)?;
            let a = multi_head_attention(g, &self.store, &block.self_attn, n, n, n, Some(&mask))?;
            x = g.add(x, a)?;
            let n = block.norm_ffn.forward(g, &self.store, x)?;
            let f = block.ffn.forward(g, &self.store, n)?;
            x = g.add(x, f)?;
        }
        self.encoder_norm.forward(g, &self.store, x)
    }

    /// Logits `[batch, tgt_len, vocab_tgt]` for decoder inputs
    /// `tgt_ids: [batch, tgt_len]`; position `t` only sees inputs `0..=t`.
    pub fn decode(
        &self,
        g: &mut Graph,
        memory: Var,
        src_lengths: &[usize],
        tgt_ids: &[usize],
        batch: usize,
        tgt_len: usize,
    ) -> Result<Var> {
        let src_len = g.shape(memory)[1];
        let mut x = self.embed(g, &self.tgt_embed, tgt_ids, batch, tgt_len)?;
        let causal = AttentionMask::causal(batch, tgt_len);
        let cross = AttentionMask::padding(src_lengths, tgt_len, src_len);
        for block in &self.decoder {
            let n = block.norm_self.forward(g, &self.store, x)?;
            let a = multi_head_attention(g, &self.store, &block.self_attn, n, n, n, Some(&causal))?;
            x = g.add(x, a)?;
            let n = block.norm_cross.forward(g, &self.store, x)?;
            let c = multi_head_attention(g, &self.store, &block.cross_attn, n, memory, memory, Some(&cross))?;
            x = g.add(x, c)?;
            let n = block.norm_ffn.forward(g, &self.store, x)?;
            let f = block.ffn.forward(g, &self.store, n)?;
            x = g.add(x, f)?;
        }
        let x = self.decoder_norm.forward(g, &self.store, x)?;
        self.output.forward(g, &self.store, x)
    }
}

impl Seq2Seq for Transformer {
    fn store(&self) -> &ParamStore {
        &self.store
    }

    fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    fn vocab_tgt(&self) -> usize {
        self.config.vocab_tgt
    }

    fn forward_teacher_forced(&self, g: &mut Graph, batch: &Batch) -> Result<Var> {
        check_target(batch)?;
        let memory = self.encode(g, &batch.src_ids, batch.size, batch.src_len, &batch.src_lengths)?;
        let inputs = batch.decoder_inputs();
        self.decode(g, memory, &batch.src_lengths, &inputs, batch.size, batch.tgt_len - 1)
    }

    /// Recomputes the decoder over the whole prefix at every step.
    fn greedy_decode_batch(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        let batch = Batch::from_ids(sources, &vec![Vec::new(); sources.len()])?;
        let mut g = Graph::inference();
        let memory = self.encode(&mut g, &batch.src_ids, batch.size, batch.src_len, &batch.src_lengths)?;
        let v = self.config.vocab_tgt;
        let mut greedy = GreedyState::new(batch.size);
        let mut prefix: Vec<Vec<usize>> = vec![vec![BOS]; batch.size];
        for step in 0..max_len {
            let len = step + 1;
            let ids: Vec<usize> = prefix.iter().flatten().copied().collect();
            let mark = g.len();
            let logits = self.decode(&mut g, memory, &batch.src_lengths, &ids, batch.size, len)?;
            let last: Vec<f64> = g
                .value(logits)
                .data()
                .chunks(len * v)
                .flat_map(|row| row[(len - 1) * v..].iter().copied())
                .collect();
            g.truncate(mark);
            let chosen = greedy.push(&last, v);
            for (row, tok) in prefix.iter_mut().zip(chosen) {
                row.push(tok);
            }
            if greedy.finished() {
                break;
            }
        }
        Ok(greedy.outputs)
    }
}
