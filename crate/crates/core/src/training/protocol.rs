use crate::data::{build_vocab, make_batches, split_corpus, split_fraction, Batch, ParallelCorpus, Vocab};
use crate::error::{contract, Result};
use crate::models::Seq2Seq;

/// Share of the training side held out for early stopping.
pub const VALIDATION_FRACTION: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub struct DataConfig {
    pub max_vocab: usize,
    pub min_freq: usize,
    pub batch_size: usize,
    pub max_len: usize,
    pub seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            max_vocab: 8000,
            min_freq: 1,
            batch_size: 32,
            max_len: 64,
            seed: 0,
        }
    }
}

/// Vocabularies and batches for the 4:1 train/test protocol.
#[derive(Clone, Debug)]
pub struct PreparedData {
    pub vocab_src: Vocab,
    pub vocab_tgt: Vocab,
    pub train: Vec<Batch>,
    pub val: Vec<Batch>,
    pub test: ParallelCorpus,
    /// Training and validation pairs dropped for exceeding `max_len`.
    pub dropped: usize,
}

/// Splits 4:1 into train/test, carves the validation set out of the training
/// side, builds both vocabularies from the remaining training pairs and
/// batches train and validation.
pub fn prepare_data(corpus: &ParallelCorpus, config: &DataConfig) -> Result<PreparedData> {
    let (train_full, test) = split_corpus(corpus, config.seed)?;
    let (train, val) = split_fraction(&train_full, 1.0 - VALIDATION_FRACTION, config.seed.wrapping_add(1));
    if train.is_empty() || val.is_empty() {
        return Err(contract(format!(
            "corpus of {} pairs is too small for a validation split",
            corpus.len()
        )));
    }
    let vocab_src = build_vocab(train.sources(), config.max_vocab, config.min_freq)?;
    let vocab_tgt = build_vocab(train.targets(), config.max_vocab, config.min_freq)?;
    let (train_batches, d1) = make_batches(&train, &vocab_src, &vocab_tgt, config.batch_size, config.max_len)?;
    let (val_batches, d2) = make_batches(&val, &vocab_src, &vocab_tgt, config.batch_size, config.max_len)?;
    Ok(PreparedData {
        vocab_src,
        vocab_tgt,
        train: train_batches,
        val: val_batches,
        test,
        dropped: d1 + d2,
    })
}

/// Greedy-translates tokenized sentences in chunks of `chunk`; empty
/// sources yield empty translations.
pub fn translate_sentences<M: Seq2Seq + ?Sized>(
    model: &M,
    vocab_src: &Vocab,
    vocab_tgt: &Vocab,
    sources: &[Vec<String>],
    max_len: usize,
    chunk: usize,
) -> Result<Vec<Vec<String>>> {
    let mut out = vec![Vec::new(); sources.len()];
    let todo: Vec<usize> = (0..sources.len()).filter(|&i| !sources[i].is_empty()).collect();
    for group in todo.chunks(chunk.max(1)) {
        let ids: Vec<Vec<usize>> = group.iter().map(|&i| vocab_src.encode(&sources[i])).collect();
        let decoded = model.greedy_decode_batch(&ids, max_len)?;
        for (&i, d) in group.iter().zip(decoded) {
            out[i] = vocab_tgt.decode(&d);
        }
    }
    Ok(out)
}
