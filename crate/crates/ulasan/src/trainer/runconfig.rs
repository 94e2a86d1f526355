//! Flat key=value run configuration files for fine-tuning runs.
//!
//! ```text
//! # training
//! learning_rate = 1e-3
//! batch_size = 16
//! epochs = 10
//! seed = 0
//! max_len = 128
//! decay = 1e-4
//! # architecture
//! encoder.L = 2
//! encoder.H = 64
//! encoder.A = 2
//! encoder.ffn = 256
//! encoder.vocab = 64
//! # files
//! data.train = out/train.csv
//! data.validation = out/validation.csv
//! data.test = out/test.csv
//! data.vocab = assets/vocab_demo.txt
//! data.out = out
//! ```
//!
//! Lines are `key = value`; `#` starts a comment. Every key is optional
//! except where a command requires a path. Errors always name the first
//! failing key.

use super::{TrainConfig, TrainerError};
use crate::encoder::EncoderConfig;
use crate::labeling::Sentiment;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub max_len: usize,
    pub decay: f64,
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    ffn: Option<usize>,
    pub vocab_size: Option<usize>,
    pub data_train: Option<String>,
    pub data_validation: Option<String>,
    pub data_test: Option<String>,
    pub data_vocab: Option<String>,
    pub data_out: Option<String>,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 10,
            seed: 0,
            max_len: 128,
            decay: 1e-4,
            layers: 2,
            hidden: 64,
            heads: 2,
            ffn: None,
            vocab_size: None,
            data_train: None,
            data_validation: None,
            data_test: None,
            data_vocab: None,
            data_out: None,
        }
    }
}

impl RunConfig {
    pub fn ffn(&self) -> usize {
        self.ffn.unwrap_or(4 * self.hidden)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            epochs: self.epochs,
            epoch_decay: self.decay,
            seed: self.seed,
            max_len: self.max_len,
        }
    }

    /// Encoder architecture for a vocabulary of `vocab_size` tokens.
    /// When the config pins `encoder.vocab`, the two must agree.
    pub fn encoder_config(&self, vocab_size: usize) -> Result<EncoderConfig, TrainerError> {
        if let Some(pinned) = self.vocab_size {
            if pinned != vocab_size {
                return Err(TrainerError::ConfigKey {
                    key: "encoder.vocab".into(),
                    message: format!("pinned to {pinned} but the vocabulary holds {vocab_size} tokens"),
                });
            }
        }
        Ok(EncoderConfig {
            layers: self.layers,
            hidden: self.hidden,
            heads: self.heads,
            ffn: self.ffn(),
            vocab_size,
            max_positions: self.max_len,
            n_classes: Sentiment::N_CLASSES,
            dropout: 0.0,
            ln_eps: 1e-12,
        })
    }

    /// Fetch a `data.*` path, failing with the key's name when absent.
    pub fn require_path(&self, key: &str) -> Result<&str, TrainerError> {
        let slot = match key {
            "data.train" => &self.data_train,
            "data.validation" => &self.data_validation,
            "data.test" => &self.data_test,
            "data.vocab" => &self.data_vocab,
            "data.out" => &self.data_out,
            _ => &None,
        };
        slot.as_deref().ok_or_else(|| TrainerError::ConfigKey {
            key: key.to_string(),
            message: "required by this command but not set".into(),
        })
    }
}

fn key_err(key: &str, message: impl Into<String>) -> TrainerError {
    TrainerError::ConfigKey {
        key: key.to_string(),
        message: message.into(),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str, kind: &str) -> Result<T, TrainerError> {
    value
        .parse()
        .map_err(|_| key_err(key, format!("expected {kind}, got '{value}'")))
}

/// Parse run-config text. The error, if any, names the first failing key
/// in file order; semantic checks run afterwards in a fixed key order.
pub fn parse_run_config(text: &str) -> Result<RunConfig, TrainerError> {
    let mut config = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for raw in text.lines() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| key_err(line, "expected 'key = value'"))?;
        let key = key.trim();
        let value = value.trim();
        if value.is_empty() {
            return Err(key_err(key, "value is empty"));
        }
        if seen.contains(&key) {
            return Err(key_err(key, "appears more than once"));
        }
        match key {
            "learning_rate" => config.learning_rate = parse_num(key, value, "a number")?,
            "batch_size" => config.batch_size = parse_num(key, value, "an integer")?,
            "epochs" => config.epochs = parse_num(key, value, "an integer")?,
            "seed" => config.seed = parse_num(key, value, "an integer")?,
            "max_len" => config.max_len = parse_num(key, value, "an integer")?,
            "decay" => config.decay = parse_num(key, value, "a number")?,
            "encoder.L" => config.layers = parse_num(key, value, "an integer")?,
            "encoder.H" => config.hidden = parse_num(key, value, "an integer")?,
            "encoder.A" => config.heads = parse_num(key, value, "an integer")?,
            "encoder.ffn" => config.ffn = Some(parse_num(key, value, "an integer")?),
            "encoder.vocab" => config.vocab_size = Some(parse_num(key, value, "an integer")?),
            "data.train" => config.data_train = Some(value.to_string()),
            "data.validation" => config.data_validation = Some(value.to_string()),
            "data.test" => config.data_test = Some(value.to_string()),
            "data.vocab" => config.data_vocab = Some(value.to_string()),
            "data.out" => config.data_out = Some(value.to_string()),
            _ => return Err(key_err(key, "unknown key")),
        }
        // Borrow trick: remember the canonical key name, not the line slice.
        seen.push(KEYS.iter().find(|&&k| k == key).expect("matched above"));
    }
    validate(&config)?;
    Ok(config)
}

const KEYS: [&str; 16] = [
    "learning_rate",
    "batch_size",
    "epochs",
    "seed",
    "max_len",
    "decay",
    "encoder.L",
    "encoder.H",
    "encoder.A",
    "encoder.ffn",
    "encoder.vocab",
    "data.train",
    "data.validation",
    "data.test",
    "data.vocab",
    "data.out",
];

fn validate(config: &RunConfig) -> Result<(), TrainerError> {
    if !(config.learning_rate > 0.0 && config.learning_rate.is_finite()) {
        return Err(key_err("learning_rate", "must be a positive number"));
    }
    if config.batch_size < 1 {
        return Err(key_err("batch_size", "must be at least 1"));
    }
    if config.epochs < 1 {
        return Err(key_err("epochs", "must be at least 1"));
    }
    if config.max_len < 2 || config.max_len > 512 {
        return Err(key_err("max_len", "must be between 2 and 512"));
    }
    if !(config.decay >= 0.0 && config.decay.is_finite()) {
        return Err(key_err("decay", "must be non-negative"));
    }
    if config.layers < 1 {
        return Err(key_err("encoder.L", "must be at least 1"));
    }
    if config.hidden < 1 {
        return Err(key_err("encoder.H", "must be at least 1"));
    }
    if config.heads < 1 || !config.hidden.is_multiple_of(config.heads) {
        return Err(key_err("encoder.A", "must divide encoder.H"));
    }
    if config.ffn == Some(0) {
        return Err(key_err("encoder.ffn", "must be at least 1"));
    }
    if config.vocab_size == Some(0) {
        return Err(key_err("encoder.vocab", "must be at least 1"));
    }
    Ok(())
}
