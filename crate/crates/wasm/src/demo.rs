use miniformer::data::{copy_task, make_batches, Batch, Vocab};
use miniformer::layers::positional_encoding;
use miniformer::metrics::{score_corpus, score_tokens, BleuMode};
use miniformer::models::{MiniFormer, MiniFormerConfig, Seq2Seq};
use miniformer::training::{train_epoch, AdamState};
use miniformer::{Error, Result};

pub const COPY_WORDS: usize = 8;
pub const COPY_PAIRS: usize = 600;
pub const COPY_MIN_LEN: usize = 2;
pub const COPY_MAX_LEN: usize = 6;
pub const COPY_LR: f64 = 0.01;
const BATCH_SIZE: usize = 16;

/// Row-major `[len, d_model]` sinusoidal encodings.
pub fn positional_encoding_matrix(len: usize, d_model: usize) -> Result<Vec<f64>> {
    Ok(positional_encoding(len, d_model)?.data().to_vec())
}

/// Corpus scores for two newline-separated texts, one `key=value` per line.
pub fn score_texts(hyp: &str, reference: &str) -> Result<String> {
    let lines = |text: &str| -> Vec<Vec<String>> { text.lines().map(score_tokens).collect() };
    let (hyps, refs) = (lines(hyp), lines(reference));
    if hyps.len() != refs.len() {
        return Err(Error::Data(format!(
            "hypothesis has {} lines but reference has {}",
            hyps.len(),
            refs.len()
        )));
    }
    Ok(score_corpus(&hyps, &refs, BleuMode::Individual)?.kv_lines())
}

/// Greedy output and the attention map behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct Decoded {
    pub source: Vec<String>,
    pub output: Vec<String>,
    /// `[steps, source_len]` row-major; one row per emitted token plus the
    /// step that produced EOS, when it was reached.
    pub weights: Vec<f64>,
    pub steps: usize,
}

/// A small Mini-Former trained one epoch at a time on the copy task.
pub struct CopyModel {
    model: MiniFormer,
    adam: AdamState,
    batches: Vec<Batch>,
    vocab: Vocab,
    seed: u64,
    epoch: usize,
}

impl CopyModel {
    pub fn new(seed: u64) -> Result<Self> {
        let corpus = copy_task(COPY_PAIRS, COPY_WORDS, COPY_MIN_LEN, COPY_MAX_LEN, seed);
        let vocab = Vocab::from_tokens((0..COPY_WORDS).map(|i| format!("w{i}")))?;
        let (batches, _) = make_batches(&corpus, &vocab, &vocab, BATCH_SIZE, COPY_MAX_LEN)?;
        let config = MiniFormerConfig {
            vocab_src: vocab.len(),
            vocab_tgt: vocab.len(),
            d_embed: 16,
            d_hidden: 16,
            max_len: COPY_MAX_LEN,
            ..MiniFormerConfig::default()
        };
        let model = MiniFormer::new(config, seed)?;
        let adam = AdamState::new(model.store(), COPY_LR);
        Ok(CopyModel {
            model,
            adam,
            batches,
            vocab,
            seed,
            epoch: 0,
        })
    }

    /// Runs one epoch and returns its mean training loss.
    pub fn train_epoch(&mut self) -> Result<f64> {
        self.epoch += 1;
        train_epoch(
            &mut self.model,
            &self.batches,
            &mut self.adam,
            self.seed,
            self.epoch,
            None,
        )
    }

    pub fn epochs(&self) -> usize {
        self.epoch
    }

    pub fn words(&self) -> Vec<String> {
        (0..COPY_WORDS).map(|i| format!("w{i}")).collect()
    }

    pub fn decode(&self, input: &str) -> Result<Decoded> {
        let source: Vec<String> = input.split_whitespace().map(String::from).collect();
        if source.is_empty() {
            return Err(Error::Data("type at least one word".into()));
        }
        let ids = self.vocab.encode(&source);
        let (mut outputs, attention) = self.model.greedy_decode_with_attention(&[ids], 2 * COPY_MAX_LEN)?;
        let steps = attention.len();
        let weights = attention
            .into_iter()
            .flat_map(|step| step.into_iter().next().unwrap_or_default())
            .collect();
        let output = self.vocab.decode(&outputs.pop().unwrap_or_default());
        Ok(Decoded {
            source,
            output,
            weights,
            steps,
        })
    }
}
