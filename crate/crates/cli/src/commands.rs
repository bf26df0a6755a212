use std::fs;
use std::io::Write;
use std::path::Path;

use miniformer::data::{tokenize, ParallelCorpus, Vocab};
use miniformer::metrics::{score_corpus, score_sentences, score_tokens, BleuMode};
use miniformer::models::{count_params, MiniFormer, Model, ModelConfig, Seq2Seq, Transformer};
use miniformer::training::{
    fit, load_checkpoint, prepare_data, save_checkpoint, translate_sentences, AdamState, FitReport,
};

use crate::{CliError, RunConfig};

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "MINIFORMER_SEED";

const DECODE_CHUNK: usize = 64;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn joined(sentences: impl Iterator<Item = impl AsRef<[String]>>) -> String {
    sentences.map(|s| s.as_ref().join(" ") + "\n").collect()
}

#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub report: FitReport,
    pub dropped: usize,
    pub vocab_src: usize,
    pub vocab_tgt: usize,
}

/// Loads the corpus, splits 4:1, trains with early stopping and writes the
/// best checkpoint, vocabularies, epoch log and resolved config.
pub fn cmd_train(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &mut dyn Write,
) -> Result<TrainSummary, CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    cfg.check_paths()?;
    let corpus = ParallelCorpus::load_files(&cfg.source, &cfg.target)?;
    let data = prepare_data(&corpus, &cfg.data_config()).map_err(CliError::data)?;

    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_file(&dir.join("config.resolved"), &cfg.resolved())?;
    data.vocab_src.save(&dir.join("vocab.src"))?;
    data.vocab_tgt.save(&dir.join("vocab.tgt"))?;
    write_file(&dir.join("test.src"), &joined(data.test.sources()))?;
    write_file(&dir.join("test.ref"), &joined(data.test.targets()))?;

    let model_cfg = cfg.model_config(data.vocab_src.len(), data.vocab_tgt.len());
    let mut model = Model::new(&model_cfg, cfg.seed)?;
    let mut adam = AdamState::new(model.store(), cfg.lr);
    let log_path = dir.join("train.log");
    let mut log = fs::File::create(&log_path).map_err(|e| io_err(&log_path, e))?;
    let _ = writeln!(
        out,
        "{} with {} parameters; {} train / {} val batches, {} test pairs, {} pairs over max_len",
        cfg.model,
        count_params(&model).total,
        data.train.len(),
        data.val.len(),
        data.test.len(),
        data.dropped
    );
    let mut log_error = None;
    let report = fit(
        &mut model,
        &mut adam,
        &data.train,
        &data.val,
        &cfg.train_config(),
        |epoch| {
            let _ = writeln!(out, "{epoch}");
            if let Err(e) = writeln!(log, "{epoch}").and_then(|_| log.flush()) {
                log_error.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = log_error {
        return Err(io_err(&log_path, e));
    }
    save_checkpoint(
        &dir.join("checkpoint.bin"),
        &model,
        Some(&adam),
        cfg.seed,
        report.best_epoch as u64,
    )?;
    let _ = writeln!(
        out,
        "best epoch {} val_loss={:.6} (initial {:.6}); wrote {}",
        report.best_epoch,
        report.best_val_loss,
        report.initial_val_loss,
        dir.display()
    );
    Ok(TrainSummary {
        report,
        dropped: data.dropped,
        vocab_src: data.vocab_src.len(),
        vocab_tgt: data.vocab_tgt.len(),
    })
}

/// Greedy-decodes every line of `input` into one line of `output`.
pub fn cmd_translate(
    checkpoint: &Path,
    input: &Path,
    output: &Path,
    max_len: Option<usize>,
) -> Result<usize, CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let dir = checkpoint.parent().unwrap_or(Path::new("."));
    let load_vocab = |name: &str| -> Result<Vocab, CliError> {
        let p = dir.join(name);
        Vocab::load(&p).map_err(|e| CliError::config(format!("{}: {e}", p.display())))
    };
    let (vs, vt) = (load_vocab("vocab.src")?, load_vocab("vocab.tgt")?);
    let config = ck.model.config();
    if config.vocab_sizes() != (vs.len(), vt.len()) {
        return Err(CliError::config(format!(
            "vocabulary sizes {}/{} do not match the checkpoint's {}/{}",
            vs.len(),
            vt.len(),
            config.vocab_sizes().0,
            config.vocab_sizes().1
        )));
    }
    let max_len = max_len.unwrap_or(match &config {
        ModelConfig::MiniFormer(c) => c.max_len,
        ModelConfig::Transformer(c) => c.max_len,
    });
    let text = fs::read_to_string(input).map_err(|e| io_err(input, e))?;
    let sources: Vec<Vec<String>> = text.lines().map(tokenize).collect();
    let hyps = translate_sentences(&ck.model, &vs, &vt, &sources, max_len, DECODE_CHUNK)?;
    write_file(output, &joined(hyps.iter()))?;
    Ok(hyps.len())
}

fn read_scored(path: &Path) -> Result<Vec<Vec<String>>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Ok(text.lines().map(score_tokens).collect())
}

/// Prints the metric table and `metric=value` lines.
pub fn cmd_score(
    hyp: &Path,
    reference: &Path,
    cumulative: bool,
    sentence: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let hyps = read_scored(hyp)?;
    let refs = read_scored(reference)?;
    if hyps.len() != refs.len() {
        return Err(CliError::config(format!(
            "line counts differ: {} has {}, {} has {}",
            hyp.display(),
            hyps.len(),
            reference.display(),
            refs.len()
        )));
    }
    if hyps.is_empty() {
        return Err(CliError::data("nothing to score: both files are empty"));
    }
    let mode = if cumulative {
        BleuMode::Cumulative
    } else {
        BleuMode::Individual
    };
    let report = if sentence {
        score_sentences(&hyps, &refs, mode)?.1
    } else {
        score_corpus(&hyps, &refs, mode)?
    };
    let label = hyp.file_stem().and_then(|s| s.to_str()).unwrap_or("system");
    let _ = write!(out, "{}\n{}", report.table(label), report.kv_lines());
    Ok(())
}

/// Parameter counts of the configured Mini-Former and the matched
/// Transformer (`d_model = 2·d_hidden`), vocabularies at `max_vocab`.
pub fn cmd_params(config_path: &Path, out: &mut dyn Write) -> Result<f64, CliError> {
    let cfg = RunConfig::load(config_path)?;
    let mini_cfg = cfg.mini_config(cfg.max_vocab, cfg.max_vocab);
    let mut t_cfg = cfg.transformer_config(cfg.max_vocab, cfg.max_vocab);
    t_cfg.d_model = 2 * cfg.d_hidden;
    t_cfg.validate()?;
    let mini = count_params(&MiniFormer::new(mini_cfg, cfg.seed)?);
    let trans = count_params(&Transformer::new(t_cfg, cfg.seed)?);
    for (name, count) in [("miniformer", &mini), ("transformer", &trans)] {
        for (module, n) in &count.breakdown {
            let _ = writeln!(out, "{name}.{module}={n}");
        }
        let _ = writeln!(out, "{name}.total={}", count.total);
    }
    let ratio = mini.total as f64 / trans.total as f64;
    let _ = writeln!(out, "ratio={ratio:.3}");
    Ok(ratio)
}
