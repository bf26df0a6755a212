use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::Linear;
use crate::error::{config, Error, Result};
use crate::tensor::{Graph, ParamStore, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Sinusoidal encoding `[len, d_model]`:
/// `PE(pos, 2i) = sin(pos / 10000^(2i/d))`, `PE(pos, 2i+1) = cos(pos / 10000^(2i/d))`.
pub fn positional_encoding(len: usize, d_model: usize) -> Result<Tensor> {
    if !d_model.is_multiple_of(2) {
        return Err(config(format!(
            "positional encoding needs an even width, got {d_model}"
        )));
    }
    let mut data = Vec::with_capacity(len * d_model);
    for pos in 0..len {
        for i in 0..d_model / 2 {
            let angle = pos as f64 / 10000f64.powf(2.0 * i as f64 / d_model as f64);
            data.push(angle.sin());
            data.push(angle.cos());
        }
    }
    Tensor::new(&[len, d_model], data)
}

/// Inner nonlinearity of the position-wise feed-forward block.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum FfnActivation {
    /// `(x·W_1 + b_1)·W_2 + b_2`, no nonlinearity.
    #[default]
    None,
    Relu,
}

impl fmt::Display for FfnActivation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FfnActivation::None => "none",
            FfnActivation::Relu => "relu",
        })
    }
}

impl FromStr for FfnActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(FfnActivation::None),
            "relu" => Ok(FfnActivation::Relu),
            other => Err(config(format!("unknown ffn_activation `{other}` (none|relu)"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
    pub activation: FfnActivation,
}

impl FeedForward {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        d_model: usize,
        d_ff: usize,
        activation: FfnActivation,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(FeedForward {
            inner: Linear::new(store, &format!("{name}.W_1"), d_model, d_ff, true, rng)?,
            outer: Linear::new(store, &format!("{name}.W_2"), d_ff, d_model, true, rng)?,
            activation,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let mut h = self.inner.forward(g, store, x)?;
        if self.activation == FfnActivation::Relu {
            h = g.relu(h);
        }
        self.outer.forward(g, store, h)
    }
}

#[derive(Clone, Debug)]
pub struct LayerNorm {
    pub gain: crate::tensor::ParamId,
    pub bias: crate::tensor::ParamId,
    pub dim: usize,
}

impl LayerNorm {
    pub fn new(store: &mut ParamStore, name: &str, dim: usize) -> Result<Self> {
        Ok(LayerNorm {
            gain: store.add(format!("{name}.gain"), Tensor::ones(&[dim]))?,
            bias: store.add(format!("{name}.bias"), Tensor::zeros(&[dim]))?,
            dim,
        })
    }

    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let gain = g.param(store, self.gain);
        let bias = g.param(store, self.bias);
        g.layer_norm(x, gain, bias, LAYER_NORM_EPS)
    }
}
