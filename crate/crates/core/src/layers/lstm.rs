use rand::Rng;

use super::init_bound;
use crate::error::{contract, Error, Result};
use crate::tensor::{Graph, ParamId, ParamStore, Tensor, Var};

/// Hidden and cell state, both `[batch, hidden]`.
#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

impl LstmState {
    pub fn zeros(g: &mut Graph, batch: usize, hidden: usize) -> Self {
        LstmState {
            h: g.constant(Tensor::zeros(&[batch, hidden])),
            c: g.constant(Tensor::zeros(&[batch, hidden])),
        }
    }
}

/// One fused weight per gate over the concatenation `[h_{t-1}, x_t]`.
///
/// Every `w_*` is `[hidden + input, hidden]` with the first `hidden` rows
/// acting on the previous hidden state; every `b_*` is `[hidden]`.
#[derive(Clone, Debug)]
pub struct LstmCellParams {
    pub w_f: ParamId,
    pub w_i: ParamId,
    pub w_c: ParamId,
    pub w_o: ParamId,
    pub b_f: ParamId,
    pub b_i: ParamId,
    pub b_c: ParamId,
    pub b_o: ParamId,
    pub input: usize,
    pub hidden: usize,
}

impl LstmCellParams {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, input: usize, hidden: usize, rng: &mut R) -> Result<Self> {
        let fan_in = input + hidden;
        let bound = init_bound(fan_in);
        let mut weight =
            |gate: &str, rng: &mut R| store.add_uniform(format!("{name}.W_{gate}"), &[fan_in, hidden], bound, rng);
        let (w_f, w_i, w_c, w_o) = (
            weight("f", rng)?,
            weight("i", rng)?,
            weight("c", rng)?,
            weight("o", rng)?,
        );
        let mut bias = |gate: &str, rng: &mut R| store.add_uniform(format!("{name}.b_{gate}"), &[hidden], bound, rng);
        let (b_f, b_i, b_c, b_o) = (bias("f", rng)?, bias("i", rng)?, bias("c", rng)?, bias("o", rng)?);
        Ok(LstmCellParams {
            w_f,
            w_i,
            w_c,
            w_o,
            b_f,
            b_i,
            b_c,
            b_o,
            input,
            hidden,
        })
    }

    pub fn weights(&self) -> [ParamId; 4] {
        [self.w_f, self.w_i, self.w_c, self.w_o]
    }

    pub fn biases(&self) -> [ParamId; 4] {
        [self.b_f, self.b_i, self.b_c, self.b_o]
    }

    pub fn numel(&self) -> usize {
        4 * ((self.input + self.hidden) * self.hidden + self.hidden)
    }
}

/// One LSTM step:
///
/// ```text
/// f = σ(W_f[h,x] + b_f)     i = σ(W_i[h,x] + b_i)     o = σ(W_o[h,x] + b_o)
/// C̃ = tanh(W_c[h,x] + b_c)  C = f∘C_prev + i∘C̃         h = o∘tanh(C)
/// ```
pub fn lstm_cell_step(
    g: &mut Graph,
    store: &ParamStore,
    params: &LstmCellParams,
    x_t: Var,
    prev: LstmState,
) -> Result<LstmState> {
    let xs = g.shape(x_t).to_vec();
    let hs = g.shape(prev.h).to_vec();
    if xs.len() != 2 || xs[1] != params.input || hs != [xs[0], params.hidden] {
        return Err(Error::Dimension {
            op: "lstm_cell_step",
            lhs: xs,
            rhs: hs,
        });
    }
    if g.shape(prev.c) != hs.as_slice() {
        return Err(Error::Dimension {
            op: "lstm_cell_step",
            lhs: hs,
            rhs: g.shape(prev.c).to_vec(),
        });
    }
    let hx = g.concat(&[prev.h, x_t], 1)?;
    let gate = |g: &mut Graph, w: ParamId, b: ParamId| -> Result<Var> {
        let w = g.param(store, w);
        let b = g.param(store, b);
        let z = g.matmul(hx, w)?;
        g.add(z, b)
    };
    let zf = gate(g, params.w_f, params.b_f)?;
    let zi = gate(g, params.w_i, params.b_i)?;
    let zc = gate(g, params.w_c, params.b_c)?;
    let zo = gate(g, params.w_o, params.b_o)?;
    let f = g.sigmoid(zf);
    let i = g.sigmoid(zi);
    let c_tilde = g.tanh(zc);
    let o = g.sigmoid(zo);
    let keep = g.mul(f, prev.c)?;
    let write = g.mul(i, c_tilde)?;
    let c = g.add(keep, write)?;
    let tc = g.tanh(c);
    let h = g.mul(o, tc)?;
    Ok(LstmState { h, c })
}

/// Per-position outputs plus the final state of each direction.
#[derive(Clone, Copy, Debug)]
pub struct BiLstmOutput {
    /// `[batch, len, 2·hidden]`, zero beyond each sequence's length.
    pub states: Var,
    /// Forward direction after the last real token of each row.
    pub final_fwd: LstmState,
    /// Backward direction after reaching position 0.
    pub final_bwd: LstmState,
}

/// Row mask `[batch, hidden]`: ones for rows whose length exceeds `t`.
fn active_rows(lengths: &[usize], t: usize, hidden: usize) -> Option<Tensor> {
    if lengths.iter().all(|&l| t < l) {
        return None;
    }
    let data = lengths
        .iter()
        .flat_map(|&l| std::iter::repeat_n(if t < l { 1.0 } else { 0.0 }, hidden))
        .collect();
    Some(Tensor::new(&[lengths.len(), hidden], data).expect("mask shape"))
}

/// Selects `new` on active rows and `old` elsewhere.
fn blend(g: &mut Graph, mask: Var, inv: Var, new: Var, old: Var) -> Result<Var> {
    let a = g.mul(new, mask)?;
    let b = g.mul(old, inv)?;
    g.add(a, b)
}

fn step_masked(
    g: &mut Graph,
    store: &ParamStore,
    params: &LstmCellParams,
    x_t: Var,
    state: LstmState,
    mask: Option<&Tensor>,
) -> Result<(LstmState, Var)> {
    let next = lstm_cell_step(g, store, params, x_t, state)?;
    match mask {
        None => Ok((next, next.h)),
        Some(m) => {
            let inv = Tensor::new(m.shape(), m.data().iter().map(|v| 1.0 - v).collect())?;
            let mv = g.constant(m.clone());
            let iv = g.constant(inv);
            let out = g.mul(next.h, mv)?;
            let h = blend(g, mv, iv, next.h, state.h)?;
            let c = blend(g, mv, iv, next.c, state.c)?;
            Ok((LstmState { h, c }, out))
        }
    }
}

/// Runs `fwd` left to right and `bwd` right to left over the unpadded extent
/// of every row of `inputs: [batch, len, d]` and concatenates the hidden
/// states per position.
#[allow(clippy::too_many_arguments)]
pub fn bilstm_forward(
    g: &mut Graph,
    store: &ParamStore,
    fwd: &LstmCellParams,
    bwd: &LstmCellParams,
    inputs: Var,
    lengths: &[usize],
    init_fwd: LstmState,
    init_bwd: LstmState,
) -> Result<BiLstmOutput> {
    let shape = g.shape(inputs).to_vec();
    if shape.len() != 3 || lengths.len() != shape[0] {
        return Err(Error::Dimension {
            op: "bilstm_forward",
            lhs: shape,
            rhs: vec![lengths.len()],
        });
    }
    let (batch, len, d) = (shape[0], shape[1], shape[2]);
    if let Some(pos) = lengths.iter().position(|&l| l == 0) {
        return Err(contract(format!("zero-length sequence at batch row {pos}")));
    }
    if let Some(&l) = lengths.iter().find(|&&l| l > len) {
        return Err(contract(format!("length {l} exceeds padded length {len}")));
    }
    if fwd.hidden != bwd.hidden {
        return Err(contract("forward and backward hidden sizes differ"));
    }
    let hidden = fwd.hidden;
    for init in [init_fwd, init_bwd] {
        if g.shape(init.h) != [batch, hidden] || g.shape(init.c) != [batch, hidden] {
            return Err(Error::Dimension {
                op: "bilstm_forward",
                lhs: vec![batch, hidden],
                rhs: g.shape(init.h).to_vec(),
            });
        }
    }

    let mut xs = Vec::with_capacity(len);
    for t in 0..len {
        let x = g.slice(inputs, 1, t, 1)?;
        xs.push(g.reshape(x, &[batch, d])?);
    }
    let masks: Vec<Option<Tensor>> = (0..len).map(|t| active_rows(lengths, t, hidden)).collect();

    let mut fwd_out = Vec::with_capacity(len);
    let mut state = init_fwd;
    for t in 0..len {
        let (next, out) = step_masked(g, store, fwd, xs[t], state, masks[t].as_ref())?;
        state = next;
        fwd_out.push(out);
    }
    let final_fwd = state;

    let mut bwd_out = vec![None; len];
    let mut state = init_bwd;
    for t in (0..len).rev() {
        let (next, out) = step_masked(g, store, bwd, xs[t], state, masks[t].as_ref())?;
        state = next;
        bwd_out[t] = Some(out);
    }
    let final_bwd = state;

    let mut columns = Vec::with_capacity(len);
    for (f, b) in fwd_out.into_iter().zip(bwd_out) {
        let joined = g.concat(&[f, b.expect("filled")], 1)?;
        columns.push(g.reshape(joined, &[batch, 1, 2 * hidden])?);
    }
    let states = g.concat(&columns, 1)?;
    Ok(BiLstmOutput {
        states,
        final_fwd,
        final_bwd,
    })
}
