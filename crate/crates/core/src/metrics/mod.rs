//! Corpus BLEU-1..4 and ROUGE-1/2/L over tokenized hypothesis/reference pairs.
//!
//! Each hypothesis has exactly one reference. Corpus scores sum matches and
//! totals across sentences before dividing.

mod bleu;
mod report;
mod rouge;

use std::collections::HashMap;
use std::hash::Hash;

use crate::error::{contract, Result};

pub use bleu::{bleu_n, brevity_penalty, cumulative_bleu, modified_precision, BleuMode};
pub use report::{score_corpus, score_sentences, MetricReport, Prf};
pub use rouge::{lcs_length, rouge, rouge_sentence, RougeVariant};

/// Added to denominators of sentence-level scores.
pub const SENTENCE_EPS: f64 = 1e-9;

/// Multiset of contiguous n-grams.
pub type NgramCounts<T> = HashMap<Vec<T>, usize>;

pub fn ngram_counts<T: Hash + Eq + Clone>(tokens: &[T], n: usize) -> Result<NgramCounts<T>> {
    if n == 0 {
        return Err(contract("n-gram order must be at least 1"));
    }
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram.to_vec()).or_insert(0) += 1;
    }
    Ok(counts)
}

/// `Σ_g min(count_hyp(g), count_ref(g))` for one sentence pair.
pub(crate) fn clipped_matches<T: Hash + Eq>(hyp: &NgramCounts<T>, reference: &NgramCounts<T>) -> usize {
    hyp.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

pub(crate) fn check_parallel<T>(hyps: &[T], refs: &[T]) -> Result<()> {
    if hyps.len() != refs.len() {
        return Err(contract(format!(
            "{} hypotheses but {} references",
            hyps.len(),
            refs.len()
        )));
    }
    Ok(())
}

/// Scoring tokenization: lowercase, split on whitespace.
pub fn score_tokens(line: &str) -> Vec<String> {
    line.split_whitespace().map(str::to_lowercase).collect()
}

/// `2PR/(P+R)`, or 0 when `P + R = 0`.
pub fn f_measure(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}
