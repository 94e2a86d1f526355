//! A compact BERT-style transformer encoder with a [CLS]-pooled
//! classification head, exact manual backpropagation, and a binary
//! weights container.
//!
//! Parameters live in one flat `f32` buffer addressed through a
//! [`ParamLayout`] of named tensors; all arithmetic widens to `f64`.
//! The tensor naming scheme (see [`ParamLayout::entries`]) is the loading
//! hook for externally converted pretrained weights:
//!
//! ```text
//! emb.token            [vocab_size, hidden]
//! emb.position         [max_positions, hidden]
//! emb.segment          [2, hidden]
//! emb.ln.scale/shift   [hidden]
//! layer{i}.attn.{q,k,v,out}.weight  [hidden, hidden]
//! layer{i}.attn.{q,k,v,out}.bias    [hidden]
//! layer{i}.attn.ln.scale/shift      [hidden]
//! layer{i}.ffn.in.weight   [hidden, ffn]
//! layer{i}.ffn.in.bias     [ffn]
//! layer{i}.ffn.out.weight  [ffn, hidden]
//! layer{i}.ffn.out.bias    [hidden]
//! layer{i}.ffn.ln.scale/shift  [hidden]
//! cls.weight           [hidden, n_classes]
//! cls.bias             [n_classes]
//! ```
//!
//! Weights apply as `y = x·W + b` with `W` stored row-major `[in, out]`.

mod backward;
mod forward;
pub(crate) mod math;
mod serialize;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backward::{loss_and_grad, DropoutMode};
pub use forward::{class_probabilities, forward, predict, ForwardCache};
pub use serialize::{load_params, load_params_expecting, peek_params, save_params};

/// Number of segment embedding rows kept for format compatibility with
/// two-sentence checkpoints; only segment 0 is used here.
pub const SEGMENT_TYPES: usize = 2;

#[derive(Debug, Error)]
pub enum EncoderError {
    #[error("invalid encoder config: {0}")]
    BadConfig(String),
    #[error("batch error: {0}")]
    BadBatch(String),
    #[error("label {label} outside class range 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("non-finite {0} encountered")]
    NonFinite(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("weights file {path}: {message}")]
    BadWeightsFile { path: String, message: String },
    #[error("tensor {name}: expected shape {expected:?}, file has {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("weights were trained with a different config: {0}")]
    ConfigMismatch(String),
}

/// Transformer hyperparameters: L layers, hidden size H, A attention heads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn: usize,
    pub vocab_size: usize,
    pub max_positions: usize,
    pub n_classes: usize,
    pub dropout: f64,
    pub ln_eps: f64,
}

impl EncoderConfig {
    /// Config with standard defaults: ffn = 4·hidden, 512 positions,
    /// 3 classes, no dropout.
    pub fn new(layers: usize, hidden: usize, heads: usize, vocab_size: usize) -> EncoderConfig {
        EncoderConfig {
            layers,
            hidden,
            heads,
            ffn: 4 * hidden,
            vocab_size,
            max_positions: 512,
            n_classes: 3,
            dropout: 0.0,
            ln_eps: 1e-12,
        }
    }

    pub fn validate(&self) -> Result<(), EncoderError> {
        let bad = |msg: String| Err(EncoderError::BadConfig(msg));
        if self.layers < 1 {
            return bad("layers must be at least 1".into());
        }
        if self.heads < 1 || self.hidden < self.heads {
            return bad(format!("heads {} invalid for hidden {}", self.heads, self.hidden));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return bad(format!(
                "hidden {} not divisible by heads {}",
                self.hidden, self.heads
            ));
        }
        if self.ffn < 1 {
            return bad("ffn size must be at least 1".into());
        }
        if self.vocab_size < 1 {
            return bad("vocab_size must be at least 1".into());
        }
        if self.max_positions < 2 || self.max_positions > 512 {
            return bad(format!("max_positions {} outside [2,512]", self.max_positions));
        }
        if self.n_classes < 2 {
            return bad("n_classes must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout {} outside [0,1)", self.dropout));
        }
        if self.ln_eps.is_nan() || self.ln_eps <= 0.0 {
            return bad("ln_eps must be positive".into());
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// Random-initialized dense weights and embedding tables.
    Weight,
    /// Zero-initialized biases and layer-norm shifts.
    Bias,
    /// One-initialized layer-norm scales.
    Scale,
}

/// One named tensor in the flat parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub kind: ParamKind,
}

impl ParamEntry {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// The canonical tensor ordering for a config: every tensor's name, shape,
/// and offset into the flat buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl ParamLayout {
    pub fn new(config: &EncoderConfig) -> ParamLayout {
        let h = config.hidden;
        let f = config.ffn;
        let mut entries = Vec::new();
        let mut total = 0usize;
        let mut push = |name: String, shape: Vec<usize>, kind: ParamKind| {
            let len: usize = shape.iter().product();
            entries.push(ParamEntry {
                name,
                shape,
                offset: total,
                kind,
            });
            total += len;
        };
        push("emb.token".into(), vec![config.vocab_size, h], ParamKind::Weight);
        push(
            "emb.position".into(),
            vec![config.max_positions, h],
            ParamKind::Weight,
        );
        push("emb.segment".into(), vec![SEGMENT_TYPES, h], ParamKind::Weight);
        push("emb.ln.scale".into(), vec![h], ParamKind::Scale);
        push("emb.ln.shift".into(), vec![h], ParamKind::Bias);
        for i in 0..config.layers {
            for proj in ["q", "k", "v", "out"] {
                push(
                    format!("layer{i}.attn.{proj}.weight"),
                    vec![h, h],
                    ParamKind::Weight,
                );
                push(format!("layer{i}.attn.{proj}.bias"), vec![h], ParamKind::Bias);
            }
            push(format!("layer{i}.attn.ln.scale"), vec![h], ParamKind::Scale);
            push(format!("layer{i}.attn.ln.shift"), vec![h], ParamKind::Bias);
            push(format!("layer{i}.ffn.in.weight"), vec![h, f], ParamKind::Weight);
            push(format!("layer{i}.ffn.in.bias"), vec![f], ParamKind::Bias);
            push(format!("layer{i}.ffn.out.weight"), vec![f, h], ParamKind::Weight);
            push(format!("layer{i}.ffn.out.bias"), vec![h], ParamKind::Bias);
            push(format!("layer{i}.ffn.ln.scale"), vec![h], ParamKind::Scale);
            push(format!("layer{i}.ffn.ln.shift"), vec![h], ParamKind::Bias);
        }
        push("cls.weight".into(), vec![h, config.n_classes], ParamKind::Weight);
        push("cls.bias".into(), vec![config.n_classes], ParamKind::Bias);
        ParamLayout { entries, total }
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn total_len(&self) -> usize {
        self.total
    }

    pub fn find(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }
}

/// Total trainable parameter count implied by a config.
pub fn param_count(config: &EncoderConfig) -> usize {
    ParamLayout::new(config).total_len()
}

/// All trainable tensors of one encoder, stored as a flat `f32` buffer.
/// Arithmetic widens to `f64`; `f32` storage keeps checkpoints compact and
/// makes save/load round trips bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    config: EncoderConfig,
    values: Vec<f32>,
}

impl EncoderParams {
    pub(crate) fn from_parts(config: EncoderConfig, values: Vec<f32>) -> EncoderParams {
        EncoderParams { config, values }
    }

    pub fn config(&self) -> &EncoderConfig {
        &self.config
    }

    pub fn layout(&self) -> ParamLayout {
        ParamLayout::new(&self.config)
    }

    pub fn param_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f32] {
        &mut self.values
    }

    /// Widened copy of the whole buffer for `f64` arithmetic.
    pub(crate) fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| v as f64).collect()
    }

    /// View one named tensor's values.
    pub fn tensor(&self, name: &str) -> Option<&[f32]> {
        let layout = self.layout();
        let entry = layout.find(name)?;
        Some(&self.values[entry.offset..entry.offset + entry.len()])
    }
}

/// Initialize parameters: weights from N(0, 0.02) truncated at ±2σ,
/// biases and layer-norm shifts zero, layer-norm scales one. Deterministic
/// under `seed` (tensors are sampled in layout order).
pub fn init_params(config: &EncoderConfig, seed: u64) -> Result<EncoderParams, EncoderError> {
    config.validate()?;
    let layout = ParamLayout::new(config);
    let mut values = vec![0.0f32; layout.total_len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0f64, 0.02).expect("valid stddev");
    for entry in layout.entries() {
        let slot = &mut values[entry.offset..entry.offset + entry.len()];
        match entry.kind {
            ParamKind::Weight => {
                for v in slot {
                    *v = truncated_sample(&normal, &mut rng) as f32;
                }
            }
            ParamKind::Bias => {}
            ParamKind::Scale => slot.fill(1.0),
        }
    }
    Ok(EncoderParams {
        config: config.clone(),
        values,
    })
}

fn truncated_sample(normal: &Normal<f64>, rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let x = normal.sample(rng);
        if x.abs() <= 0.04 {
            return x;
        }
    }
}
