use std::fmt::Write;

use crate::encoders::{Dims, ModelVariant, VariantKind};
use crate::error::{Error, Result};

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub variant: ModelVariant,
    pub learning_rate: f64,
    /// Epoch `n` (from 1) uses `learning_rate / (1 + lr_decay · (n - 1))`.
    pub lr_decay: f64,
    pub clip_norm: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub dropout: f64,
    pub seed: u64,
    pub dims: Dims,
    pub train_word_embeddings: bool,
    pub constrain_transitions: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            variant: ModelVariant::new(VariantKind::Word2),
            learning_rate: 0.01,
            lr_decay: 0.05,
            clip_norm: 5.0,
            max_epochs: 100,
            patience: 10,
            dropout: 0.5,
            seed: 42,
            dims: Dims::default(),
            train_word_embeddings: true,
            constrain_transitions: false,
        }
    }
}

/// Keys accepted by [`TrainConfig::set`], in serialization order.
pub const KEYS: [&str; 17] = [
    "variant",
    "learning_rate",
    "lr_decay",
    "clip_norm",
    "max_epochs",
    "patience",
    "dropout",
    "seed",
    "word_dim",
    "char_dim",
    "word_hidden",
    "cnn_filters",
    "cnn_window",
    "char_hidden",
    "char_model_hidden",
    "train_word_embeddings",
    "constrain_transitions",
];

impl TrainConfig {
    pub fn for_variant(kind: VariantKind) -> Self {
        TrainConfig {
            variant: ModelVariant::new(kind),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(self.lr_decay >= 0.0) {
            return bad(format!("lr_decay must be non-negative, got {}", self.lr_decay));
        }
        if !(self.clip_norm > 0.0) {
            return bad(format!("clip_norm must be positive, got {}", self.clip_norm));
        }
        if self.patience < 1 {
            return bad("patience must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        let d = &self.dims;
        for (name, v) in [
            ("word_dim", d.word_dim),
            ("char_dim", d.char_dim),
            ("word_hidden", d.word_hidden),
            ("cnn_filters", d.cnn_filters),
            ("cnn_window", d.cnn_window),
            ("char_hidden", d.char_hidden),
            ("char_model_hidden", d.char_model_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if d.cnn_window % 2 == 0 {
            return bad(format!("cnn_window must be odd, got {}", d.cnn_window));
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
        }
        let d = &mut self.dims;
        match key {
            "variant" => self.variant = value.trim().parse()?,
            "learning_rate" => self.learning_rate = num(key, value)?,
            "lr_decay" => self.lr_decay = num(key, value)?,
            "clip_norm" => self.clip_norm = num(key, value)?,
            "max_epochs" => self.max_epochs = num(key, value)?,
            "patience" => self.patience = num(key, value)?,
            "dropout" => self.dropout = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "word_dim" => d.word_dim = num(key, value)?,
            "char_dim" => d.char_dim = num(key, value)?,
            "word_hidden" => d.word_hidden = num(key, value)?,
            "cnn_filters" => d.cnn_filters = num(key, value)?,
            "cnn_window" => d.cnn_window = num(key, value)?,
            "char_hidden" => d.char_hidden = num(key, value)?,
            "char_model_hidden" => d.char_model_hidden = num(key, value)?,
            "train_word_embeddings" => self.train_word_embeddings = num(key, value)?,
            "constrain_transitions" => self.constrain_transitions = num(key, value)?,
            _ => return Err(Error::Config(format!("unknown configuration key {key:?}"))),
        }
        Ok(())
    }

    /// `key=value` lines for every field.
    pub fn to_kv(&self) -> String {
        let d = &self.dims;
        let values: [String; 17] = [
            self.variant.to_string(),
            self.learning_rate.to_string(),
            self.lr_decay.to_string(),
            self.clip_norm.to_string(),
            self.max_epochs.to_string(),
            self.patience.to_string(),
            self.dropout.to_string(),
            self.seed.to_string(),
            d.word_dim.to_string(),
            d.char_dim.to_string(),
            d.word_hidden.to_string(),
            d.cnn_filters.to_string(),
            d.cnn_window.to_string(),
            d.char_hidden.to_string(),
            d.char_model_hidden.to_string(),
            self.train_word_embeddings.to_string(),
            self.constrain_transitions.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in KEYS.iter().zip(values) {
            writeln!(out, "{k}={v}").unwrap();
        }
        out
    }

    /// Applies `key=value` lines on top of `self`. Blank lines and lines
    /// starting with `#` are skipped. With `strict`, unknown keys are
    /// errors; otherwise they are returned for the caller to interpret.
    pub fn apply_kv(&mut self, text: &str, strict: bool) -> Result<Vec<(String, String)>> {
        let mut unknown = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)))?;
            let (k, v) = (k.trim(), v.trim());
            if KEYS.contains(&k) {
                self.set(k, v)?;
            } else if strict {
                return Err(Error::Config(format!("line {}: unknown key {k:?}", i + 1)));
            } else {
                unknown.push((k.to_string(), v.to_string()));
            }
        }
        Ok(unknown)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults() {
        let c = TrainConfig::default();
        assert_eq!(c.learning_rate, 0.01);
        assert_eq!(c.clip_norm, 5.0);
        assert_eq!(c.patience, 10);
        assert_eq!(c.max_epochs, 100);
        assert_eq!(c.dims.word_hidden, 200);
        assert_eq!(c.dims.cnn_filters, 30);
        assert_eq!(c.dims.char_hidden, 25);
        assert_eq!(c.dims.char_model_hidden, 150);
        c.validate().unwrap();
    }

    #[test]
    fn kv_round_trip() {
        let mut c = TrainConfig::for_variant(VariantKind::Char0);
        c.learning_rate = 0.0123456789;
        c.dims.char_dim = 17;
        c.constrain_transitions = true;
        let mut back = TrainConfig::default();
        back.apply_kv(&c.to_kv(), true).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_values() {
        let mut c = TrainConfig::default();
        assert!(c.set("dropout", "abc").is_err());
        assert!(c.set("nope", "1").is_err());
        assert!(c.set("variant", "Word-9").is_err());
        c.set("dropout", "1.0").unwrap();
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.set("patience", "0").unwrap();
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.set("cnn_window", "4").unwrap();
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        let unknown = c.apply_kv("# comment\n\nseed = 7\ntrain=path\n", false).unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(unknown, [("train".to_string(), "path".to_string())]);
        assert!(c.apply_kv("train=path", true).is_err());
        assert!(c.apply_kv("novalue", true).is_err());
    }
}
