use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{GreedyState, MiniFormerConfig, Seq2Seq};
use crate::data::{Batch, BOS};
use crate::error::{contract, Result};
use crate::layers::{
    bilstm_forward, lstm_cell_step, scaled_dot_attention, AttentionMask, Embedding, Linear, LstmCellParams, LstmState,
};
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Attention rows indexed `[step][batch][src_pos]`.
pub type AttentionTrace = Vec<Vec<Vec<f64>>>;

/// Half-width of the uniform init for the learnable encoder start states.
const INIT_STATE_BOUND: f64 = 1e-2;

/// Trainable `h0`/`c0` for both directions, each `[1, d_hidden]`.
#[derive(Clone, Debug)]
pub struct LearnableInitState {
    pub h0_fwd: ParamId,
    pub c0_fwd: ParamId,
    pub h0_bwd: ParamId,
    pub c0_bwd: ParamId,
}

#[derive(Clone, Debug)]
pub struct EncoderLayer {
    pub fwd: LstmCellParams,
    pub bwd: LstmCellParams,
    pub init: LearnableInitState,
}

/// Encoder states `[batch, src_len, 2·d_hidden]` plus what the decoder needs.
#[derive(Clone, Debug)]
pub struct EncoderOutput {
    pub states: Var,
    pub lengths: Vec<usize>,
    pub final_fwd: LstmState,
    pub final_bwd: LstmState,
    /// Source padding mask for a single decoder query, `[batch, 1, src_len]`.
    pub mask: AttentionMask,
}

/// Result of one decoder step.
#[derive(Clone, Copy, Debug)]
pub struct DecodeStep {
    /// `[batch, vocab_tgt]`
    pub logits: Var,
    pub state: LstmState,
    /// `[batch, src_len]`
    pub attn_weights: Var,
}

/// Bi-LSTM encoder with learnable start states, LSTM decoder attending over
/// the encoder outputs with `softmax(dec·encᵀ/√d_enc)`.
#[derive(Clone, Debug)]
pub struct MiniFormer {
    pub config: MiniFormerConfig,
    pub store: ParamStore,
    pub src_embed: Embedding,
    pub encoder: Vec<EncoderLayer>,
    pub bridge_h: Linear,
    pub bridge_c: Linear,
    pub tgt_embed: Embedding,
    pub decoder_cell: LstmCellParams,
    pub combine: Linear,
    pub output: Linear,
}

impl MiniFormer {
    pub fn new(config: MiniFormerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut store = ParamStore::new();
        let (h, d_dec) = (config.d_hidden, config.d_dec());

        let src_embed = Embedding::new(&mut store, "src_embed", config.vocab_src, config.d_embed, &mut rng)?;
        let mut encoder = Vec::with_capacity(config.enc_layers);
        for layer in 0..config.enc_layers {
            let prefix = if layer == 0 {
                "encoder".to_string()
            } else {
                format!("encoder.layer{layer}")
            };
            let input = if layer == 0 { config.d_embed } else { 2 * h };
            let fwd = LstmCellParams::new(&mut store, &format!("{prefix}.lstm_fwd"), input, h, &mut rng)?;
            let bwd = LstmCellParams::new(&mut store, &format!("{prefix}.lstm_bwd"), input, h, &mut rng)?;
            let mut state =
                |name: &str| store.add_uniform(format!("{prefix}.{name}"), &[1, h], INIT_STATE_BOUND, &mut rng);
            let init = LearnableInitState {
                h0_fwd: state("h0_fwd")?,
                c0_fwd: state("c0_fwd")?,
                h0_bwd: state("h0_bwd")?,
                c0_bwd: state("c0_bwd")?,
            };
            encoder.push(EncoderLayer { fwd, bwd, init });
        }
        let bridge_h = Linear::new(&mut store, "decoder.init_h", 2 * h, d_dec, true, &mut rng)?;
        let bridge_c = Linear::new(&mut store, "decoder.init_c", 2 * h, d_dec, true, &mut rng)?;
        let tgt_embed = Embedding::new(&mut store, "tgt_embed", config.vocab_tgt, config.d_embed, &mut rng)?;
        let decoder_cell = LstmCellParams::new(&mut store, "decoder.lstm", config.d_embed, d_dec, &mut rng)?;
        let combine = Linear::new(
            &mut store,
            "decoder.combine",
            config.d_enc() + d_dec,
            d_dec,
            true,
            &mut rng,
        )?;
        let output = Linear::new(&mut store, "decoder.out", d_dec, config.vocab_tgt, true, &mut rng)?;
        Ok(MiniFormer {
            config,
            store,
            src_embed,
            encoder,
            bridge_h,
            bridge_c,
            tgt_embed,
            decoder_cell,
            combine,
            output,
        })
    }

    /// Broadcast-copies a `[1, d]` parameter to `[batch, d]`.
    fn expand(&self, g: &mut Graph, id: ParamId, batch: usize) -> Result<Var> {
        let d = self.store.value(id).numel();
        let p = g.param(&self.store, id);
        let row = g.reshape(p, &[d])?;
        let zeros = g.constant(Tensor::zeros(&[batch, d]));
        g.add(zeros, row)
    }

    /// Embeds `src_ids: [batch, src_len]` and runs the Bi-LSTM stack.
    pub fn encode(
        &self,
        g: &mut Graph,
        src_ids: &[usize],
        batch: usize,
        src_len: usize,
        lengths: &[usize],
    ) -> Result<EncoderOutput> {
        let mut x = self.src_embed.lookup(g, &self.store, src_ids, batch, src_len)?;
        let mut last = None;
        for layer in &self.encoder {
            let init_fwd = LstmState {
                h: self.expand(g, layer.init.h0_fwd, batch)?,
                c: self.expand(g, layer.init.c0_fwd, batch)?,
            };
            let init_bwd = LstmState {
                h: self.expand(g, layer.init.h0_bwd, batch)?,
                c: self.expand(g, layer.init.c0_bwd, batch)?,
            };
            let out = bilstm_forward(g, &self.store, &layer.fwd, &layer.bwd, x, lengths, init_fwd, init_bwd)?;
            x = out.states;
            last = Some(out);
        }
        let out = last.expect("at least one encoder layer");
        Ok(EncoderOutput {
            states: out.states,
            lengths: lengths.to_vec(),
            final_fwd: out.final_fwd,
            final_bwd: out.final_bwd,
            mask: AttentionMask::padding(lengths, 1, src_len),
        })
    }

    /// `tanh(W·[h_fwd, h_bwd] + b)` for `h`, likewise for `c`.
    pub fn initial_decoder_state(&self, g: &mut Graph, enc: &EncoderOutput) -> Result<LstmState> {
        let h_cat = g.concat(&[enc.final_fwd.h, enc.final_bwd.h], 1)?;
        let c_cat = g.concat(&[enc.final_fwd.c, enc.final_bwd.c], 1)?;
        let h = self.bridge_h.forward(g, &self.store, h_cat)?;
        let c = self.bridge_c.forward(g, &self.store, c_cat)?;
        Ok(LstmState {
            h: g.tanh(h),
            c: g.tanh(c),
        })
    }

    /// Embed the previous tokens, advance the decoder cell, attend over the
    /// encoder outputs and project `tanh(W_c·[context, h] + b_c)` to logits.
    pub fn decode_step(
        &self,
        g: &mut Graph,
        prev_tokens: &[usize],
        state: LstmState,
        enc: &EncoderOutput,
    ) -> Result<DecodeStep> {
        let batch = prev_tokens.len();
        let d_dec = self.config.d_dec();
        let x = self.tgt_embed.lookup_rows(g, &self.store, prev_tokens)?;
        let next = lstm_cell_step(g, &self.store, &self.decoder_cell, x, state)?;
        let query = g.reshape(next.h, &[batch, 1, d_dec])?;
        let attn = scaled_dot_attention(g, query, enc.states, enc.states, Some(&enc.mask))?;
        let context = g.reshape(attn.context, &[batch, self.config.d_enc()])?;
        let src_len = g.shape(enc.states)[1];
        let attn_weights = g.reshape(attn.weights, &[batch, src_len])?;
        let joined = g.concat(&[context, next.h], 1)?;
        let combined = self.combine.forward(g, &self.store, joined)?;
        let combined = g.tanh(combined);
        let logits = self.output.forward(g, &self.store, combined)?;
        Ok(DecodeStep {
            logits,
            state: next,
            attn_weights,
        })
    }

    /// Greedy decoding that also returns per-step attention rows
    /// (`[steps][batch][src_len]`).
    pub fn greedy_decode_with_attention(
        &self,
        sources: &[Vec<usize>],
        max_len: usize,
    ) -> Result<(Vec<Vec<usize>>, AttentionTrace)> {
        let batch = Batch::from_ids(sources, &vec![Vec::new(); sources.len()])?;
        let mut g = Graph::inference();
        let enc = self.encode(&mut g, &batch.src_ids, batch.size, batch.src_len, &batch.src_lengths)?;
        let mut state = self.initial_decoder_state(&mut g, &enc)?;
        let mut greedy = GreedyState::new(batch.size);
        let mut prev = vec![BOS; batch.size];
        let mut attention = Vec::new();
        for _ in 0..max_len {
            let step = self.decode_step(&mut g, &prev, state, &enc)?;
            prev = greedy.push(g.value(step.logits).data(), self.config.vocab_tgt);
            attention.push(
                g.value(step.attn_weights)
                    .data()
                    .chunks(batch.src_len)
                    .map(<[f64]>::to_vec)
                    .collect(),
            );
            state = step.state;
            if greedy.finished() {
                break;
            }
        }
        Ok((greedy.outputs, attention))
    }
}

pub(crate) fn check_target(batch: &Batch) -> Result<()> {
    if batch.tgt_len < 2 {
        return Err(contract("target needs at least BOS and one token to predict"));
    }
    if batch.tgt_ids.chunks(batch.tgt_len).any(|row| row[0] != BOS) {
        return Err(contract("every target row must start with BOS"));
    }
    Ok(())
}

impl Seq2Seq for MiniFormer {
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
        let enc = self.encode(g, &batch.src_ids, batch.size, batch.src_len, &batch.src_lengths)?;
        let mut state = self.initial_decoder_state(g, &enc)?;
        let steps = batch.tgt_len - 1;
        let v = self.config.vocab_tgt;
        let mut columns = Vec::with_capacity(steps);
        for t in 0..steps {
            let prev: Vec<usize> = (0..batch.size).map(|b| batch.tgt_ids[b * batch.tgt_len + t]).collect();
            let step = self.decode_step(g, &prev, state, &enc)?;
            state = step.state;
            columns.push(g.reshape(step.logits, &[batch.size, 1, v])?);
        }
        g.concat(&columns, 1)
    }

    fn greedy_decode_batch(&self, sources: &[Vec<usize>], max_len: usize) -> Result<Vec<Vec<usize>>> {
        Ok(self.greedy_decode_with_attention(sources, max_len)?.0)
    }
}
