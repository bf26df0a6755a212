use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::{config, Error, Result};
use crate::layers::FfnActivation;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    MiniFormer,
    Transformer,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::MiniFormer => "miniformer",
            ModelKind::Transformer => "transformer",
        })
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "miniformer" => Ok(ModelKind::MiniFormer),
            "transformer" => Ok(ModelKind::Transformer),
            other => Err(config(format!("unknown model kind `{other}` (miniformer|transformer)"))),
        }
    }
}

/// Bi-LSTM encoder with `d_hidden` units per direction; the decoder runs at
/// `d_dec = 2·d_hidden` so its state can be dotted directly with encoder outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MiniFormerConfig {
    pub vocab_src: usize,
    pub vocab_tgt: usize,
    pub d_embed: usize,
    pub d_hidden: usize,
    pub enc_layers: usize,
    pub max_len: usize,
    /// Carried for parity with the Transformer config; the Mini-Former has no FFN.
    pub ffn_activation: FfnActivation,
}

impl Default for MiniFormerConfig {
    fn default() -> Self {
        MiniFormerConfig {
            vocab_src: 1000,
            vocab_tgt: 1000,
            d_embed: 64,
            d_hidden: 32,
            enc_layers: 1,
            max_len: 64,
            ffn_activation: FfnActivation::None,
        }
    }
}

impl MiniFormerConfig {
    pub fn d_dec(&self) -> usize {
        2 * self.d_hidden
    }

    pub fn d_enc(&self) -> usize {
        2 * self.d_hidden
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[
            ("vocab_src", self.vocab_src),
            ("vocab_tgt", self.vocab_tgt),
            ("d_embed", self.d_embed),
            ("d_hidden", self.d_hidden),
            ("enc_layers", self.enc_layers),
            ("max_len", self.max_len),
        ])
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformerConfig {
    pub vocab_src: usize,
    pub vocab_tgt: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub n_layers_enc: usize,
    pub n_layers_dec: usize,
    pub max_len: usize,
    pub ffn_activation: FfnActivation,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            vocab_src: 1000,
            vocab_tgt: 1000,
            d_model: 64,
            n_heads: 4,
            d_ff: 256,
            n_layers_enc: 2,
            n_layers_dec: 2,
            max_len: 64,
            ffn_activation: FfnActivation::None,
        }
    }
}

impl TransformerConfig {
    /// Baseline sized against a Mini-Former: `d_model = 2·d_hidden`, same
    /// vocabularies and length cap.
    pub fn matched(mini: &MiniFormerConfig, n_heads: usize, n_layers: usize, d_ff: usize) -> Self {
        TransformerConfig {
            vocab_src: mini.vocab_src,
            vocab_tgt: mini.vocab_tgt,
            d_model: 2 * mini.d_hidden,
            n_heads,
            d_ff,
            n_layers_enc: n_layers,
            n_layers_dec: n_layers,
            max_len: mini.max_len,
            ffn_activation: mini.ffn_activation,
        }
    }

    pub fn validate(&self) -> Result<()> {
        positive(&[
            ("vocab_src", self.vocab_src),
            ("vocab_tgt", self.vocab_tgt),
            ("d_model", self.d_model),
            ("n_heads", self.n_heads),
            ("d_ff", self.d_ff),
            ("n_layers_enc", self.n_layers_enc),
            ("n_layers_dec", self.n_layers_dec),
            ("max_len", self.max_len),
        ])?;
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(config(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        if !self.d_model.is_multiple_of(2) {
            return Err(config(format!("d_model {} must be even", self.d_model)));
        }
        Ok(())
    }
}

fn positive(fields: &[(&str, usize)]) -> Result<()> {
    match fields.iter().find(|(_, v)| *v == 0) {
        Some((name, _)) => Err(config(format!("{name} must be positive"))),
        None => Ok(()),
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ModelConfig {
    MiniFormer(MiniFormerConfig),
    Transformer(TransformerConfig),
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::MiniFormer(_) => ModelKind::MiniFormer,
            ModelConfig::Transformer(_) => ModelKind::Transformer,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::MiniFormer(c) => c.validate(),
            ModelConfig::Transformer(c) => c.validate(),
        }
    }

    pub fn vocab_sizes(&self) -> (usize, usize) {
        match self {
            ModelConfig::MiniFormer(c) => (c.vocab_src, c.vocab_tgt),
            ModelConfig::Transformer(c) => (c.vocab_src, c.vocab_tgt),
        }
    }

    /// `key=value` lines, sorted by key.
    pub fn to_kv(&self) -> String {
        let mut map = BTreeMap::new();
        map.insert("model", self.kind().to_string());
        match self {
            ModelConfig::MiniFormer(c) => {
                map.insert("vocab_src", c.vocab_src.to_string());
                map.insert("vocab_tgt", c.vocab_tgt.to_string());
                map.insert("d_embed", c.d_embed.to_string());
                map.insert("d_hidden", c.d_hidden.to_string());
                map.insert("enc_layers", c.enc_layers.to_string());
                map.insert("max_len", c.max_len.to_string());
                map.insert("ffn_activation", c.ffn_activation.to_string());
            }
            ModelConfig::Transformer(c) => {
                map.insert("vocab_src", c.vocab_src.to_string());
                map.insert("vocab_tgt", c.vocab_tgt.to_string());
                map.insert("d_model", c.d_model.to_string());
                map.insert("n_heads", c.n_heads.to_string());
                map.insert("d_ff", c.d_ff.to_string());
                map.insert("n_layers_enc", c.n_layers_enc.to_string());
                map.insert("n_layers_dec", c.n_layers_dec.to_string());
                map.insert("max_len", c.max_len.to_string());
                map.insert("ffn_activation", c.ffn_activation.to_string());
            }
        }
        map.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn from_kv(text: &str) -> Result<Self> {
        let mut map: BTreeMap<&str, &str> = BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| config(format!("malformed model config line `{line}`")))?;
            map.insert(k.trim(), v.trim());
        }
        let mut take = |key: &str| -> Result<&str> {
            map.remove(key)
                .ok_or_else(|| config(format!("model config is missing `{key}`")))
        };
        let num = |s: &str, key: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| config(format!("`{key}` is not a non-negative integer: `{s}`")))
        };
        let kind: ModelKind = take("model")?.parse()?;
        let cfg = match kind {
            ModelKind::MiniFormer => ModelConfig::MiniFormer(MiniFormerConfig {
                vocab_src: num(take("vocab_src")?, "vocab_src")?,
                vocab_tgt: num(take("vocab_tgt")?, "vocab_tgt")?,
                d_embed: num(take("d_embed")?, "d_embed")?,
                d_hidden: num(take("d_hidden")?, "d_hidden")?,
                enc_layers: num(take("enc_layers")?, "enc_layers")?,
                max_len: num(take("max_len")?, "max_len")?,
                ffn_activation: take("ffn_activation")?.parse()?,
            }),
            ModelKind::Transformer => ModelConfig::Transformer(TransformerConfig {
                vocab_src: num(take("vocab_src")?, "vocab_src")?,
                vocab_tgt: num(take("vocab_tgt")?, "vocab_tgt")?,
                d_model: num(take("d_model")?, "d_model")?,
                n_heads: num(take("n_heads")?, "n_heads")?,
                d_ff: num(take("d_ff")?, "d_ff")?,
                n_layers_enc: num(take("n_layers_enc")?, "n_layers_enc")?,
                n_layers_dec: num(take("n_layers_dec")?, "n_layers_dec")?,
                max_len: num(take("max_len")?, "max_len")?,
                ffn_activation: take("ffn_activation")?.parse()?,
            }),
        };
        if let Some(extra) = map.keys().next() {
            return Err(config(format!("unexpected model config key `{extra}`")));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kv_roundtrip_both_kinds() {
        let a = ModelConfig::MiniFormer(MiniFormerConfig::default());
        assert_eq!(ModelConfig::from_kv(&a.to_kv()).unwrap(), a);
        let b = ModelConfig::Transformer(TransformerConfig {
            ffn_activation: FfnActivation::Relu,
            ..TransformerConfig::default()
        });
        assert_eq!(ModelConfig::from_kv(&b.to_kv()).unwrap(), b);
    }

    #[test]
    fn kv_rejects_unknown_and_missing_keys() {
        let text = ModelConfig::MiniFormer(MiniFormerConfig::default()).to_kv();
        assert!(ModelConfig::from_kv(&format!("{text}bogus=1\n")).is_err());
        assert!(ModelConfig::from_kv(&text.replace("d_hidden=32\n", "")).is_err());
    }

    #[test]
    fn heads_must_divide_width() {
        let c = TransformerConfig {
            n_heads: 3,
            ..TransformerConfig::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn matched_baseline_doubles_hidden() {
        let mini = MiniFormerConfig::default();
        let t = TransformerConfig::matched(&mini, 4, 2, 256);
        assert_eq!(t.d_model, mini.d_dec());
        assert_eq!(t.vocab_tgt, mini.vocab_tgt);
    }
}
