use std::fmt::Write;
use std::path::{Path, PathBuf};

use miniformer::layers::FfnActivation;
use miniformer::models::{MiniFormerConfig, ModelConfig, ModelKind, TransformerConfig};
use miniformer::training::{DataConfig, TrainConfig, DEFAULT_LR, DEFAULT_PATIENCE};

use crate::CliError;

/// Everything `train` needs, read from a flat `key = value` file.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub source: PathBuf,
    pub target: PathBuf,
    pub output_dir: PathBuf,
    pub seed: u64,

    pub max_vocab: usize,
    pub min_freq: usize,
    pub max_len: usize,

    pub batch_size: usize,
    pub lr: f64,
    pub max_epochs: usize,
    pub patience: usize,
    /// 0 disables clipping.
    pub clip_norm: f64,

    pub d_embed: usize,
    pub d_hidden: usize,
    pub enc_layers: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers: usize,
    pub ffn_activation: FfnActivation,
}

impl Default for RunConfig {
    fn default() -> Self {
        let mini = MiniFormerConfig::default();
        let t = TransformerConfig::default();
        RunConfig {
            model: ModelKind::MiniFormer,
            source: PathBuf::from("train.src"),
            target: PathBuf::from("train.tgt"),
            output_dir: PathBuf::from("run"),
            seed: 0,
            max_vocab: 8000,
            min_freq: 1,
            max_len: mini.max_len,
            batch_size: 32,
            lr: DEFAULT_LR,
            max_epochs: 50,
            patience: DEFAULT_PATIENCE,
            clip_norm: 0.0,
            d_embed: mini.d_embed,
            d_hidden: mini.d_hidden,
            enc_layers: mini.enc_layers,
            d_model: t.d_model,
            n_heads: t.n_heads,
            d_ff: t.d_ff,
            n_layers: t.n_layers_enc,
            ffn_activation: FfnActivation::None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::config(format!("`{key}`: cannot parse `{value}`")))
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment. Relative paths,
    /// including the defaults, are resolved against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen = std::collections::HashSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| CliError::config(format!("line {}: expected `key = value`", lineno + 1)))?;
            if !seen.insert(key.to_string()) {
                return Err(CliError::config(format!("line {}: `{key}` set twice", lineno + 1)));
            }
            match key {
                "model" => cfg.model = value.parse().map_err(CliError::from)?,
                "source" => cfg.source = PathBuf::from(value),
                "target" => cfg.target = PathBuf::from(value),
                "output_dir" => cfg.output_dir = PathBuf::from(value),
                "seed" => cfg.seed = parse_num(key, value)?,
                "max_vocab" => cfg.max_vocab = parse_num(key, value)?,
                "min_freq" => cfg.min_freq = parse_num(key, value)?,
                "max_len" => cfg.max_len = parse_num(key, value)?,
                "batch_size" => cfg.batch_size = parse_num(key, value)?,
                "lr" => cfg.lr = parse_num(key, value)?,
                "max_epochs" => cfg.max_epochs = parse_num(key, value)?,
                "patience" => cfg.patience = parse_num(key, value)?,
                "clip_norm" => cfg.clip_norm = parse_num(key, value)?,
                "d_embed" => cfg.d_embed = parse_num(key, value)?,
                "d_hidden" => cfg.d_hidden = parse_num(key, value)?,
                "enc_layers" => cfg.enc_layers = parse_num(key, value)?,
                "d_model" => cfg.d_model = parse_num(key, value)?,
                "n_heads" => cfg.n_heads = parse_num(key, value)?,
                "d_ff" => cfg.d_ff = parse_num(key, value)?,
                "n_layers" => cfg.n_layers = parse_num(key, value)?,
                "ffn_activation" => cfg.ffn_activation = value.parse().map_err(CliError::from)?,
                other => return Err(CliError::config(format!("line {}: unknown key `{other}`", lineno + 1))),
            }
        }
        for p in [&mut cfg.source, &mut cfg.target, &mut cfg.output_dir] {
            *p = base_dir.join(&*p);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Dimension and hyperparameter checks; file existence is checked by
    /// [`RunConfig::check_paths`].
    pub fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("max_vocab", self.max_vocab),
            ("max_len", self.max_len),
            ("batch_size", self.batch_size),
            ("max_epochs", self.max_epochs),
            ("patience", self.patience),
        ];
        if let Some((k, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(CliError::config(format!("`{k}` must be positive")));
        }
        if self.max_vocab <= 4 {
            return Err(CliError::config("`max_vocab` must exceed the 4 reserved tokens"));
        }
        if !(self.lr.is_finite() && self.lr >= 0.0) {
            return Err(CliError::config(format!(
                "`lr` must be a non-negative number, got {}",
                self.lr
            )));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm >= 0.0) {
            return Err(CliError::config(
                "`clip_norm` must be non-negative (0 disables clipping)",
            ));
        }
        self.model_config(self.max_vocab, self.max_vocab).validate()?;
        Ok(())
    }

    pub fn check_paths(&self) -> Result<(), CliError> {
        for p in [&self.source, &self.target] {
            if !p.is_file() {
                return Err(CliError::data(format!("corpus file not found: {}", p.display())));
            }
        }
        Ok(())
    }

    pub fn mini_config(&self, vocab_src: usize, vocab_tgt: usize) -> MiniFormerConfig {
        MiniFormerConfig {
            vocab_src,
            vocab_tgt,
            d_embed: self.d_embed,
            d_hidden: self.d_hidden,
            enc_layers: self.enc_layers,
            max_len: self.max_len,
            ffn_activation: self.ffn_activation,
        }
    }

    pub fn transformer_config(&self, vocab_src: usize, vocab_tgt: usize) -> TransformerConfig {
        TransformerConfig {
            vocab_src,
            vocab_tgt,
            d_model: self.d_model,
            n_heads: self.n_heads,
            d_ff: self.d_ff,
            n_layers_enc: self.n_layers,
            n_layers_dec: self.n_layers,
            max_len: self.max_len,
            ffn_activation: self.ffn_activation,
        }
    }

    pub fn model_config(&self, vocab_src: usize, vocab_tgt: usize) -> ModelConfig {
        match self.model {
            ModelKind::MiniFormer => ModelConfig::MiniFormer(self.mini_config(vocab_src, vocab_tgt)),
            ModelKind::Transformer => ModelConfig::Transformer(self.transformer_config(vocab_src, vocab_tgt)),
        }
    }

    pub fn data_config(&self) -> DataConfig {
        DataConfig {
            max_vocab: self.max_vocab,
            min_freq: self.min_freq,
            batch_size: self.batch_size,
            max_len: self.max_len,
            seed: self.seed,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            lr: self.lr,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            clip_norm: (self.clip_norm > 0.0).then_some(self.clip_norm),
            seed: self.seed,
        }
    }

    /// Every key with its effective value, in the same syntax `parse` reads.
    pub fn resolved(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("model", &self.model);
        kv("source", &self.source.display());
        kv("target", &self.target.display());
        kv("output_dir", &self.output_dir.display());
        kv("seed", &self.seed);
        kv("max_vocab", &self.max_vocab);
        kv("min_freq", &self.min_freq);
        kv("max_len", &self.max_len);
        kv("batch_size", &self.batch_size);
        kv("lr", &self.lr);
        kv("max_epochs", &self.max_epochs);
        kv("patience", &self.patience);
        kv("clip_norm", &self.clip_norm);
        kv("d_embed", &self.d_embed);
        kv("d_hidden", &self.d_hidden);
        kv("enc_layers", &self.enc_layers);
        kv("d_model", &self.d_model);
        kv("n_heads", &self.n_heads);
        kv("d_ff", &self.d_ff);
        kv("n_layers", &self.n_layers);
        kv("ffn_activation", &self.ffn_activation);
        s
    }
}
