//! Gradient-check cases: each returns the worst relative error it saw.

use miniformer::data::Batch;
use miniformer::layers::{
    bilstm_forward, lstm_cell_step, multi_head_attention, scaled_dot_attention, AttentionMask, Embedding, FeedForward,
    FfnActivation, LayerNorm, Linear, LstmCellParams, LstmState, MultiHeadAttention,
};
use miniformer::models::{MiniFormer, MiniFormerConfig, Transformer, TransformerConfig};
use miniformer::tensor::{Graph, ParamStore};
use miniformer::training::batch_loss;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{check_inputs, check_params, noise, project};

pub const TOL_MATMUL: f64 = 1e-6;
pub const TOL_CROSS_ENTROPY: f64 = 1e-5;
pub const TOL_LAYER: f64 = 1e-4;

pub struct Case {
    pub name: &'static str,
    pub run: fn() -> f64,
    pub tol: f64,
}

pub const CASES: &[Case] = &[
    Case {
        name: "matmul",
        run: matmul,
        tol: TOL_MATMUL,
    },
    Case {
        name: "batch_matmul",
        run: batch_matmul,
        tol: TOL_MATMUL,
    },
    Case {
        name: "elementwise",
        run: elementwise,
        tol: TOL_LAYER,
    },
    Case {
        name: "softmax",
        run: softmax,
        tol: TOL_LAYER,
    },
    Case {
        name: "shape_ops",
        run: shape_ops,
        tol: TOL_LAYER,
    },
    Case {
        name: "cross_entropy",
        run: cross_entropy,
        tol: TOL_CROSS_ENTROPY,
    },
    Case {
        name: "embedding",
        run: embedding,
        tol: TOL_LAYER,
    },
    Case {
        name: "linear",
        run: linear,
        tol: TOL_LAYER,
    },
    Case {
        name: "layer_norm",
        run: layer_norm,
        tol: TOL_LAYER,
    },
    Case {
        name: "ffn",
        run: ffn,
        tol: TOL_LAYER,
    },
    Case {
        name: "lstm_cell_step",
        run: lstm_cell,
        tol: TOL_LAYER,
    },
    Case {
        name: "bilstm",
        run: bilstm,
        tol: TOL_LAYER,
    },
    Case {
        name: "attention",
        run: attention,
        tol: TOL_LAYER,
    },
    Case {
        name: "multi_head_attention",
        run: multi_head,
        tol: TOL_LAYER,
    },
    Case {
        name: "miniformer_loss",
        run: miniformer_loss,
        tol: TOL_LAYER,
    },
    Case {
        name: "transformer_loss",
        run: transformer_loss,
        tol: TOL_LAYER,
    },
];

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Replaces every parameter value with fresh noise so gains and biases are
/// not sitting at special points.
fn randomise(store: &mut ParamStore, seed: u64) {
    let ids: Vec<_> = store.ids().collect();
    for (k, id) in ids.into_iter().enumerate() {
        let shape = store.value(id).shape().to_vec();
        store.get_mut(id).value = noise(&shape, seed + k as u64);
    }
}

pub fn matmul() -> f64 {
    check_inputs(&[noise(&[3, 4], 1), noise(&[4, 2], 2)], |g, v| {
        let y = g.matmul(v[0], v[1])?;
        project(g, y, 3)
    })
}

pub fn batch_matmul() -> f64 {
    check_inputs(&[noise(&[2, 3, 4], 4), noise(&[2, 4, 3], 5)], |g, v| {
        let y = g.batch_matmul(v[0], v[1])?;
        project(g, y, 6)
    })
}

pub fn elementwise() -> f64 {
    check_inputs(&[noise(&[3, 4], 7), noise(&[3, 4], 8), noise(&[4], 9)], |g, v| {
        let a = g.add(v[0], v[2])?;
        let s = g.sigmoid(a);
        let t = g.tanh(v[1]);
        let m = g.mul(s, t)?;
        let e = g.exp(v[0]);
        let e = g.scale(e, 0.1);
        let d = g.sub(m, e)?;
        let r = g.relu(d);
        let sc = g.scale(r, 1.7);
        let b = g.mul(sc, v[2])?;
        project(g, b, 10)
    })
}

pub fn softmax() -> f64 {
    check_inputs(&[noise(&[2, 3, 5], 11)], |g, v| {
        let s = g.softmax(v[0])?;
        project(g, s, 12)
    })
}

pub fn shape_ops() -> f64 {
    check_inputs(&[noise(&[2, 3, 4], 13), noise(&[2, 2, 4], 14)], |g, v| {
        let c = g.concat(&[v[0], v[1]], 1)?;
        let s = g.slice(c, 1, 1, 3)?;
        let p = g.permute(s, &[2, 0, 1])?;
        let r = g.reshape(p, &[4, 6])?;
        let t = g.transpose(r)?;
        let m = g.mean(v[1]);
        let shifted = g.add(t, m)?;
        project(g, shifted, 15)
    })
}

pub fn cross_entropy() -> f64 {
    let targets = [1, 4, 0, 2, 3, 1];
    let mask = [true, true, false, true, true, true];
    check_inputs(&[noise(&[2, 3, 5], 16)], |g, v| g.cross_entropy(v[0], &targets, &mask))
}

pub fn embedding() -> f64 {
    let mut store = ParamStore::new();
    let emb = Embedding::new(&mut store, "emb", 5, 3, &mut rng(17)).unwrap();
    check_params(&store, |g, s| {
        let x = emb.lookup(g, s, &[1, 4, 1, 0, 2, 4], 2, 3)?;
        project(g, x, 18)
    })
}

pub fn linear() -> f64 {
    let mut store = ParamStore::new();
    let lin = Linear::new(&mut store, "lin", 4, 3, true, &mut rng(19)).unwrap();
    let x = noise(&[2, 3, 4], 20);
    let p = check_params(&store, |g, s| {
        let xv = g.constant(x.clone());
        let y = lin.forward(g, s, xv)?;
        project(g, y, 21)
    });
    let i = check_inputs(std::slice::from_ref(&x), |g, v| {
        let y = lin.forward(g, &store, v[0])?;
        project(g, y, 21)
    });
    p.max(i)
}

pub fn layer_norm() -> f64 {
    let mut store = ParamStore::new();
    let ln = LayerNorm::new(&mut store, "ln", 5).unwrap();
    randomise(&mut store, 22);
    let x = noise(&[4, 5], 23);
    let p = check_params(&store, |g, s| {
        let xv = g.constant(x.clone());
        let y = ln.forward(g, s, xv)?;
        project(g, y, 24)
    });
    let i = check_inputs(std::slice::from_ref(&x), |g, v| {
        let y = ln.forward(g, &store, v[0])?;
        project(g, y, 24)
    });
    p.max(i)
}

pub fn ffn() -> f64 {
    let mut store = ParamStore::new();
    let ff = FeedForward::new(&mut store, "ffn", 4, 5, FfnActivation::Relu, &mut rng(25)).unwrap();
    let x = noise(&[2, 3, 4], 26);
    let p = check_params(&store, |g, s| {
        let xv = g.constant(x.clone());
        let y = ff.forward(g, s, xv)?;
        project(g, y, 27)
    });
    let i = check_inputs(std::slice::from_ref(&x), |g, v| {
        let y = ff.forward(g, &store, v[0])?;
        project(g, y, 27)
    });
    p.max(i)
}

pub fn lstm_cell() -> f64 {
    let mut store = ParamStore::new();
    let cell = LstmCellParams::new(&mut store, "cell", 4, 3, &mut rng(28)).unwrap();
    let (x, h, c) = (noise(&[2, 4], 29), noise(&[2, 3], 30), noise(&[2, 3], 31));
    let step = |g: &mut Graph, s: &ParamStore, x, h, c| -> miniformer::Result<_> {
        let next = lstm_cell_step(g, s, &cell, x, LstmState { h, c })?;
        let both = g.concat(&[next.h, next.c], 1)?;
        project(g, both, 32)
    };
    let p = check_params(&store, |g, s| {
        let (xv, hv, cv) = (g.constant(x.clone()), g.constant(h.clone()), g.constant(c.clone()));
        step(g, s, xv, hv, cv)
    });
    let i = check_inputs(&[x.clone(), h.clone(), c.clone()], |g, v| {
        step(g, &store, v[0], v[1], v[2])
    });
    p.max(i)
}

pub fn bilstm() -> f64 {
    let mut store = ParamStore::new();
    let fwd = LstmCellParams::new(&mut store, "fwd", 2, 3, &mut rng(33)).unwrap();
    let bwd = LstmCellParams::new(&mut store, "bwd", 2, 3, &mut rng(34)).unwrap();
    let x = noise(&[2, 3, 2], 35);
    let (h0, c0) = (noise(&[2, 3], 36), noise(&[2, 3], 37));
    let run = |g: &mut Graph, s: &ParamStore, xv, hv, cv| -> miniformer::Result<_> {
        let init = LstmState { h: hv, c: cv };
        let out = bilstm_forward(g, s, &fwd, &bwd, xv, &[3, 2], init, init)?;
        let states = g.reshape(out.states, &[2, 18])?;
        let all = g.concat(&[states, out.final_fwd.h, out.final_bwd.c], 1)?;
        project(g, all, 38)
    };
    let p = check_params(&store, |g, s| {
        let (xv, hv, cv) = (g.constant(x.clone()), g.constant(h0.clone()), g.constant(c0.clone()));
        run(g, s, xv, hv, cv)
    });
    let i = check_inputs(&[x.clone(), h0.clone(), c0.clone()], |g, v| {
        run(g, &store, v[0], v[1], v[2])
    });
    p.max(i)
}

pub fn attention() -> f64 {
    let mask = AttentionMask::padding(&[4, 2], 3, 4);
    check_inputs(
        &[noise(&[2, 3, 4], 39), noise(&[2, 4, 4], 40), noise(&[2, 4, 3], 41)],
        |g, v| {
            let out = scaled_dot_attention(g, v[0], v[1], v[2], Some(&mask))?;
            let a = project(g, out.context, 42)?;
            let b = project(g, out.weights, 43)?;
            g.add(a, b)
        },
    )
}

pub fn multi_head() -> f64 {
    let mut store = ParamStore::new();
    let mha = MultiHeadAttention::new(&mut store, "mha", 4, 2, &mut rng(44)).unwrap();
    let mask = AttentionMask::causal(2, 3);
    let (q, kv) = (noise(&[2, 3, 4], 45), noise(&[2, 3, 4], 46));
    let p = check_params(&store, |g, s| {
        let (qv, kvv) = (g.constant(q.clone()), g.constant(kv.clone()));
        let y = multi_head_attention(g, s, &mha, qv, kvv, kvv, Some(&mask))?;
        project(g, y, 47)
    });
    let i = check_inputs(&[q.clone(), kv.clone()], |g, v| {
        let y = multi_head_attention(g, &store, &mha, v[0], v[1], v[1], Some(&mask))?;
        project(g, y, 47)
    });
    p.max(i)
}

fn toy_batch() -> Batch {
    Batch::from_ids(&[vec![4, 5, 6], vec![6, 4]], &[vec![5, 4], vec![6, 6, 5]]).unwrap()
}

pub fn miniformer_loss() -> f64 {
    let model = MiniFormer::new(
        MiniFormerConfig {
            vocab_src: 7,
            vocab_tgt: 7,
            d_embed: 3,
            d_hidden: 2,
            ..MiniFormerConfig::default()
        },
        48,
    )
    .unwrap();
    let batch = toy_batch();
    check_params(&model.store, |g, s| {
        let mut m = model.clone();
        m.store = s.clone();
        batch_loss(g, &m, &batch)
    })
}

pub fn transformer_loss() -> f64 {
    let mut model = Transformer::new(
        TransformerConfig {
            vocab_src: 7,
            vocab_tgt: 7,
            d_model: 4,
            n_heads: 2,
            d_ff: 4,
            n_layers_enc: 1,
            n_layers_dec: 1,
            max_len: 8,
            ffn_activation: FfnActivation::None,
        },
        49,
    )
    .unwrap();
    randomise(&mut model.store, 50);
    let batch = toy_batch();
    check_params(&model.store, |g, s| {
        let mut m = model.clone();
        m.store = s.clone();
        batch_loss(g, &m, &batch)
    })
}
