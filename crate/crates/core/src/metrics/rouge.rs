use std::hash::Hash;

use super::{check_parallel, clipped_matches, f_measure, ngram_counts, Prf, SENTENCE_EPS};
use crate::error::{contract, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RougeVariant {
    /// n-gram overlap of the given order.
    N(usize),
    /// Longest common subsequence.
    L,
}

/// Longest common subsequence length, `O(|a|·|b|)` time and `O(|b|)` space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// (matches, hypothesis units, reference units) for one sentence pair.
fn counts<T: Hash + Eq + Clone>(hyp: &[T], reference: &[T], variant: RougeVariant) -> Result<(usize, usize, usize)> {
    Ok(match variant {
        RougeVariant::N(n) => {
            let hc = ngram_counts(hyp, n)?;
            let rc = ngram_counts(reference, n)?;
            (
                clipped_matches(&hc, &rc),
                hyp.len().saturating_sub(n - 1),
                reference.len().saturating_sub(n - 1),
            )
        }
        RougeVariant::L => (lcs_length(hyp, reference), hyp.len(), reference.len()),
    })
}

fn prf(c: f64, sys: f64, reference: f64) -> Prf {
    let p = if sys == 0.0 { 0.0 } else { c / sys };
    let r = if reference == 0.0 { 0.0 } else { c / reference };
    Prf {
        p,
        r,
        f: f_measure(p, r),
    }
}

/// Corpus ROUGE: matches and both denominators are summed over sentences.
pub fn rouge<T: Hash + Eq + Clone>(hyps: &[Vec<T>], refs: &[Vec<T>], variant: RougeVariant) -> Result<Prf> {
    check_parallel(hyps, refs)?;
    if hyps.is_empty() {
        return Err(contract("ROUGE of an empty corpus"));
    }
    let (mut c, mut s, mut r) = (0, 0, 0);
    for (h, rf) in hyps.iter().zip(refs) {
        let (dc, ds, dr) = counts(h, rf, variant)?;
        c += dc;
        s += ds;
        r += dr;
    }
    Ok(prf(c as f64, s as f64, r as f64))
}

/// ROUGE of one pair with `1e-9` added to each denominator.
pub fn rouge_sentence<T: Hash + Eq + Clone>(hyp: &[T], reference: &[T], variant: RougeVariant) -> Result<Prf> {
    let (c, s, r) = counts(hyp, reference, variant)?;
    let p = c as f64 / (s as f64 + SENTENCE_EPS);
    let r = c as f64 / (r as f64 + SENTENCE_EPS);
    Ok(Prf {
        p,
        r,
        f: f_measure(p, r),
    })
}
