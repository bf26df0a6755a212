use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tokenize;
use crate::error::{contract, Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SentencePair {
    pub source: Vec<String>,
    pub target: Vec<String>,
}

/// Aligned source/target sentences.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParallelCorpus {
    pub pairs: Vec<SentencePair>,
    pub provenance: Option<PathBuf>,
}

impl ParallelCorpus {
    /// Keeps pairs where both sides are non-empty.
    pub fn from_pairs(pairs: Vec<SentencePair>) -> Self {
        ParallelCorpus {
            pairs: pairs
                .into_iter()
                .filter(|p| !p.source.is_empty() && !p.target.is_empty())
                .collect(),
            provenance: None,
        }
    }

    /// Reads `<prefix>.src` and `<prefix>.tgt`.
    pub fn load(prefix: &Path) -> Result<Self> {
        let src = prefix.with_extension("src");
        let tgt = prefix.with_extension("tgt");
        let mut corpus = Self::load_files(&src, &tgt)?;
        corpus.provenance = Some(prefix.to_path_buf());
        Ok(corpus)
    }

    pub fn load_files(src: &Path, tgt: &Path) -> Result<Self> {
        let read = |p: &Path| fs::read_to_string(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())));
        let (s, t) = (read(src)?, read(tgt)?);
        let (s, t): (Vec<&str>, Vec<&str>) = (s.lines().collect(), t.lines().collect());
        if s.len() != t.len() {
            return Err(Error::Data(format!(
                "{} has {} lines but {} has {}",
                src.display(),
                s.len(),
                tgt.display(),
                t.len()
            )));
        }
        let pairs = s
            .iter()
            .zip(&t)
            .map(|(a, b)| SentencePair {
                source: tokenize(a),
                target: tokenize(b),
            })
            .collect();
        let mut corpus = Self::from_pairs(pairs);
        corpus.provenance = Some(src.to_path_buf());
        Ok(corpus)
    }

    /// Writes `<prefix>.src` / `<prefix>.tgt`, one space-joined sentence per line.
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let join = |side: fn(&SentencePair) -> &Vec<String>| {
            self.pairs.iter().map(|p| side(p).join(" ") + "\n").collect::<String>()
        };
        fs::write(prefix.with_extension("src"), join(|p| &p.source))?;
        fs::write(prefix.with_extension("tgt"), join(|p| &p.target))?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn sources(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|p| p.source.as_slice())
    }

    pub fn targets(&self) -> impl Iterator<Item = &[String]> {
        self.pairs.iter().map(|p| p.target.as_slice())
    }
}

/// Seeded shuffle, then the first `⌊fraction·N⌋` pairs go to the first part.
pub fn split_fraction(corpus: &ParallelCorpus, fraction: f64, seed: u64) -> (ParallelCorpus, ParallelCorpus) {
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = (fraction * corpus.len() as f64).floor() as usize;
    let take = |ix: &[usize]| ParallelCorpus {
        pairs: ix.iter().map(|&i| corpus.pairs[i].clone()).collect(),
        provenance: corpus.provenance.clone(),
    };
    (take(&order[..cut]), take(&order[cut..]))
}

/// The 4:1 train/test split.
pub fn split_corpus(corpus: &ParallelCorpus, seed: u64) -> Result<(ParallelCorpus, ParallelCorpus)> {
    if corpus.len() < 5 {
        return Err(contract(format!(
            "a 4:1 split needs at least 5 pairs, corpus has {}",
            corpus.len()
        )));
    }
    Ok(split_fraction(corpus, 0.8, seed))
}
