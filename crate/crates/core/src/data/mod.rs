//! Parallel corpora, tokenization, vocabularies, splitting and batching.

mod batch;
mod corpus;
mod toy;
mod vocab;

pub use batch::{make_batches, Batch};
pub use corpus::{split_corpus, split_fraction, ParallelCorpus, SentencePair};
pub use toy::copy_task;
pub use vocab::{build_vocab, Vocab, BOS, EOS, PAD, RESERVED, UNK};

/// Lowercases, splits on whitespace and peels leading/trailing punctuation
/// off each word as single-character tokens.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    for word in line.to_lowercase().split_whitespace() {
        let chars: Vec<char> = word.chars().collect();
        let lead = chars.iter().take_while(|c| c.is_ascii_punctuation()).count();
        if lead == chars.len() {
            tokens.extend(chars.iter().map(|c| c.to_string()));
            continue;
        }
        let trail = chars.iter().rev().take_while(|c| c.is_ascii_punctuation()).count();
        tokens.extend(chars[..lead].iter().map(|c| c.to_string()));
        tokens.push(chars[lead..chars.len() - trail].iter().collect());
        tokens.extend(chars[chars.len() - trail..].iter().map(|c| c.to_string()));
    }
    tokens
}
