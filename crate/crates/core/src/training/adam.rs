use crate::error::{contract, Result};
use crate::tensor::ParamStore;

pub const DEFAULT_LR: f64 = 1e-3;

/// Adam moments for every parameter of one store, in store order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, lr: f64) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, p)| vec![0.0; p.value.numel()]).collect();
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected Adam update from the gradients held in `store`,
    /// which are zeroed afterwards.
    pub fn step(&mut self, store: &mut ParamStore) -> Result<()> {
        if store.len() != self.m.len() {
            return Err(contract(format!(
                "optimizer tracks {} parameters but the model has {}",
                self.m.len(),
                store.len()
            )));
        }
        for (k, p) in store.iter().map(|(_, p)| p).enumerate() {
            if p.grad.len() != p.value.numel() || self.m[k].len() != p.value.numel() {
                return Err(contract(format!("missing gradient for parameter `{}`", p.name)));
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (k, p) in store.iter_mut().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (i, (w, g)) in p.value.data_mut().iter_mut().zip(p.grad.iter_mut()).enumerate() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * *g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * *g * *g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                *w -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
                *g = 0.0;
            }
        }
        Ok(())
    }
}

/// Rescales all gradients so their global L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_grad_norm(store: &mut ParamStore, max_norm: f64) -> f64 {
    let norm = store.grad_norm();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for p in store.iter_mut() {
            p.grad.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}
