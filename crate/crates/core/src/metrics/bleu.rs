use std::hash::Hash;

use super::{check_parallel, clipped_matches, ngram_counts};
use crate::error::Result;

/// Clipped n-gram matches and total hypothesis n-grams, summed over the corpus.
pub fn modified_precision<T: Hash + Eq + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], n: usize) -> Result<(usize, usize)> {
    check_parallel(hyps, refs)?;
    let mut matches = 0;
    let mut total = 0;
    for (h, r) in hyps.iter().zip(refs) {
        let hc = ngram_counts(h, n)?;
        let rc = ngram_counts(r, n)?;
        matches += clipped_matches(&hc, &rc);
        total += h.len().saturating_sub(n - 1);
    }
    Ok((matches, total))
}

/// 1 when the hypothesis is at least as long as the reference, otherwise
/// `exp(1 − ref/hyp)`; 0 for an empty hypothesis.
pub fn brevity_penalty(hyp_len: usize, ref_len: usize) -> f64 {
    if hyp_len == 0 {
        0.0
    } else if hyp_len >= ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BleuMode {
    /// `BP · p_n` using order `n` alone.
    #[default]
    Individual,
    /// `BP · exp(mean_{k≤n} ln p_k)`, the usual uniform-weight BLEU-n.
    Cumulative,
}

fn corpus_lengths<T>(hyps: &[Vec<T>], refs: &[Vec<T>]) -> (usize, usize) {
    (hyps.iter().map(Vec::len).sum(), refs.iter().map(Vec::len).sum())
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Corpus BLEU at exactly order `n`: brevity penalty times modified precision.
pub fn bleu_n<T: Hash + Eq + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], n: usize) -> Result<f64> {
    let (m, t) = modified_precision(hyps, refs, n)?;
    let (hl, rl) = corpus_lengths(hyps, refs);
    Ok(brevity_penalty(hl, rl) * ratio(m, t))
}

/// Geometric mean of `p_1..p_n` times the brevity penalty; 0 if any `p_k` is 0.
pub fn cumulative_bleu<T: Hash + Eq + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], n: usize) -> Result<f64> {
    let mut log_sum = 0.0;
    for k in 1..=n {
        let (m, t) = modified_precision(hyps, refs, k)?;
        let p = ratio(m, t);
        if p == 0.0 {
            return Ok(0.0);
        }
        log_sum += p.ln();
    }
    let (hl, rl) = corpus_lengths(hyps, refs);
    Ok(brevity_penalty(hl, rl) * (log_sum / n as f64).exp())
}
