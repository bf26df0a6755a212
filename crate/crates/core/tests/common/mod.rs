//! Central finite-difference gradient oracle shared by the integration tests.
#![allow(dead_code)]

pub mod cases;

use miniformer::tensor::{Graph, ParamStore, Tensor, Var};
use miniformer::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor so gradients near zero are compared absolutely.
pub const REL_FLOOR: f64 = 1e-6;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

pub fn noise(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

/// Reduces any output to a scalar `Σ out ⊙ R` with fixed random `R`, so every
/// output component contributes to the checked gradient.
pub fn project(g: &mut Graph, out: Var, seed: u64) -> Result<Var> {
    let shape = g.shape(out).to_vec();
    let r = g.constant(noise(&shape, seed ^ 0xABCD));
    let prod = g.mul(out, r)?;
    Ok(g.sum(prod))
}

/// Largest relative error between backprop and central differences over
/// every element of every input.
pub fn check_inputs<F>(inputs: &[Tensor], f: F) -> f64
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let eval = |values: &[Tensor]| -> f64 {
        let mut g = Graph::new();
        let vars: Vec<Var> = values.iter().map(|t| g.variable(t.clone())).collect();
        let out = f(&mut g, &vars).unwrap();
        g.value(out).item()
    };
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.variable(t.clone())).collect();
    let out = f(&mut g, &vars).unwrap();
    g.backward(out).unwrap();
    let analytic: Vec<Vec<f64>> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| g.grad(v).map(<[f64]>::to_vec).unwrap_or(vec![0.0; t.numel()]))
        .collect();

    let mut worst: f64 = 0.0;
    let mut values = inputs.to_vec();
    for k in 0..values.len() {
        for i in 0..values[k].numel() {
            let orig = values[k].data()[i];
            values[k].data_mut()[i] = orig + FD_STEP;
            let up = eval(&values);
            values[k].data_mut()[i] = orig - FD_STEP;
            let down = eval(&values);
            values[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[k][i], numeric));
        }
    }
    worst
}

/// Same as [`check_inputs`] but over every element of every parameter in
/// `store`.
pub fn check_params<F>(store: &ParamStore, f: F) -> f64
where
    F: Fn(&mut Graph, &ParamStore) -> Result<Var>,
{
    let eval = |s: &ParamStore| -> f64 {
        let mut g = Graph::new();
        let out = f(&mut g, s).unwrap();
        g.value(out).item()
    };
    let mut work = store.clone();
    work.zero_grads();
    let mut g = Graph::new();
    let out = f(&mut g, &work).unwrap();
    g.backward(out).unwrap();
    g.accumulate_param_grads(&mut work);
    let analytic: Vec<Vec<f64>> = work.iter().map(|(_, p)| p.grad.clone()).collect();

    let ids: Vec<_> = work.ids().collect();
    let mut worst: f64 = 0.0;
    for (k, &id) in ids.iter().enumerate() {
        for i in 0..work.value(id).numel() {
            let orig = work.value(id).data()[i];
            work.get_mut(id).value.data_mut()[i] = orig + FD_STEP;
            let up = eval(&work);
            work.get_mut(id).value.data_mut()[i] = orig - FD_STEP;
            let down = eval(&work);
            work.get_mut(id).value.data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            worst = worst.max(rel_err(analytic[k][i], numeric));
        }
    }
    worst
}

/// LCS by enumerating every subsequence of the shorter sequence.
pub fn brute_force_lcs<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (short, long) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let is_subsequence = |picked: &[&T]| {
        let mut it = long.iter();
        picked.iter().all(|p| it.any(|x| x == *p))
    };
    let mut best = 0;
    for bits in 0u32..(1 << short.len()) {
        let picked: Vec<&T> = (0..short.len())
            .filter(|i| bits >> i & 1 == 1)
            .map(|i| &short[i])
            .collect();
        if picked.len() > best && is_subsequence(&picked) {
            best = picked.len();
        }
    }
    best
}

/// Random token sequences over a small alphabet, lengths `0..=max_len`.
pub fn random_pairs(count: usize, alphabet: u8, max_len: usize, seed: u64) -> Vec<(Vec<u8>, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seq = |rng: &mut ChaCha8Rng| {
        let n = rng.gen_range(0..=max_len);
        (0..n).map(|_| rng.gen_range(0..alphabet)).collect::<Vec<u8>>()
    };
    (0..count).map(|_| (seq(&mut rng), seq(&mut rng))).collect()
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

/// `key=value` lines, skipping blanks and `#` comments.
pub fn parse_kv(text: &str) -> Vec<(String, String)> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn read_lines_tokens(path: &std::path::Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(miniformer::metrics::score_tokens)
        .collect()
}
