use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ParallelCorpus, SentencePair};

/// Synthetic copy task: each target equals its source, tokens `w0..w{vocab-1}`,
/// lengths drawn uniformly from `min_len..=max_len`.
pub fn copy_task(pairs: usize, vocab: usize, min_len: usize, max_len: usize, seed: u64) -> ParallelCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..pairs)
        .map(|_| {
            let len = rng.gen_range(min_len..=max_len);
            let tokens: Vec<String> = (0..len).map(|_| format!("w{}", rng.gen_range(0..vocab))).collect();
            SentencePair {
                source: tokens.clone(),
                target: tokens,
            }
        })
        .collect();
    ParallelCorpus::from_pairs(pairs)
}
