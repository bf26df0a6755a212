use std::collections::HashMap;
use std::fs;
use std::path::Path;

use crate::error::{contract, Error, Result};

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const RESERVED: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<unk>"];

/// Bidirectional token/id map. Ids 0..4 are reserved for PAD, BOS, EOS, UNK.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from non-reserved tokens in id order (first gets id 4).
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut vocab = Vocab {
            tokens: RESERVED.iter().map(|s| s.to_string()).collect(),
            index: HashMap::new(),
        };
        for (i, tok) in RESERVED.iter().enumerate() {
            vocab.index.insert(tok.to_string(), i);
        }
        for tok in tokens {
            let tok = tok.into();
            if vocab.index.contains_key(&tok) {
                return Err(contract(format!("duplicate vocabulary entry `{tok}`")));
            }
            vocab.index.insert(tok.clone(), vocab.tokens.len());
            vocab.tokens.push(tok);
        }
        Ok(vocab)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    /// Maps ids back to tokens; out-of-range ids become `<unk>`.
    pub fn decode(&self, ids: &[usize]) -> Vec<String> {
        ids.iter()
            .map(|&id| self.token(id).unwrap_or(RESERVED[UNK]).to_string())
            .collect()
    }

    /// One token per line; line `k` (0-based) holds id `k + 4`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = String::new();
        for tok in &self.tokens[RESERVED.len()..] {
            text.push_str(tok);
            text.push('\n');
        }
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_tokens(text.lines().filter(|l| !l.is_empty()))
            .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }
}

/// Most frequent tokens first, ties broken lexicographically; keeps at most
/// `max_size` entries including the four reserved ones, and drops tokens
/// seen fewer than `min_freq` times.
pub fn build_vocab<'a, I>(sentences: I, max_size: usize, min_freq: usize) -> Result<Vocab>
where
    I: IntoIterator<Item = &'a [String]>,
{
    if max_size <= RESERVED.len() {
        return Err(contract(format!(
            "vocabulary size {max_size} leaves no room beyond the reserved ids"
        )));
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for sentence in sentences {
        for tok in sentence {
            *counts.entry(tok.as_str()).or_default() += 1;
        }
    }
    let mut ranked: Vec<(&str, usize)> = counts
        .into_iter()
        .filter(|(tok, n)| *n >= min_freq && !RESERVED.contains(tok))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    ranked.truncate(max_size - RESERVED.len());
    Vocab::from_tokens(ranked.into_iter().map(|(t, _)| t))
}
