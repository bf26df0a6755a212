use rand::Rng;

use super::init_bound;
use crate::error::{Error, Result};
use crate::tensor::{Graph, ParamId, ParamStore, Var};

/// Affine map `x·W + b` over the last axis, `W: [in, out]`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: Option<ParamId>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Linear {
    pub fn new<R: Rng>(
        store: &mut ParamStore,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        bias: bool,
        rng: &mut R,
    ) -> Result<Self> {
        let bound = init_bound(in_dim);
        let weight = store.add_uniform(format!("{name}.weight"), &[in_dim, out_dim], bound, rng)?;
        let bias = if bias {
            Some(store.add_uniform(format!("{name}.bias"), &[out_dim], bound, rng)?)
        } else {
            None
        };
        Ok(Linear {
            weight,
            bias,
            in_dim,
            out_dim,
        })
    }

    /// Applies the map to `x: [..., in]`, returning `[..., out]`.
    pub fn forward(&self, g: &mut Graph, store: &ParamStore, x: Var) -> Result<Var> {
        let shape = g.shape(x).to_vec();
        if shape.last() != Some(&self.in_dim) {
            return Err(Error::Dimension {
                op: "linear",
                lhs: shape,
                rhs: vec![self.in_dim, self.out_dim],
            });
        }
        let rows = shape.iter().product::<usize>() / self.in_dim;
        let flat = if shape.len() == 2 {
            x
        } else {
            g.reshape(x, &[rows, self.in_dim])?
        };
        let w = g.param(store, self.weight);
        let mut y = g.matmul(flat, w)?;
        if let Some(b) = self.bias {
            let b = g.param(store, b);
            y = g.add(y, b)?;
        }
        if shape.len() == 2 {
            Ok(y)
        } else {
            let mut out = shape;
            *out.last_mut().unwrap() = self.out_dim;
            g.reshape(y, &out)
        }
    }
}

/// Token embedding table `[vocab, dim]`.
#[derive(Clone, Debug)]
pub struct Embedding {
    pub table: ParamId,
    pub vocab: usize,
    pub dim: usize,
}

impl Embedding {
    pub fn new<R: Rng>(store: &mut ParamStore, name: &str, vocab: usize, dim: usize, rng: &mut R) -> Result<Self> {
        let table = store.add_uniform(format!("{name}.table"), &[vocab, dim], init_bound(dim), rng)?;
        Ok(Embedding { table, vocab, dim })
    }

    /// Row gather for a `[batch, len]` id matrix given in row-major order.
    pub fn lookup(&self, g: &mut Graph, store: &ParamStore, ids: &[usize], batch: usize, len: usize) -> Result<Var> {
        if ids.len() != batch * len {
            return Err(Error::Dimension {
                op: "embedding_lookup",
                lhs: vec![batch, len],
                rhs: vec![ids.len()],
            });
        }
        let rows = self.lookup_rows(g, store, ids)?;
        g.reshape(rows, &[batch, len, self.dim])
    }

    /// Row gather returning `[ids.len(), dim]`.
    pub fn lookup_rows(&self, g: &mut Graph, store: &ParamStore, ids: &[usize]) -> Result<Var> {
        let table = g.param(store, self.table);
        g.gather_rows(table, ids)
    }
}
