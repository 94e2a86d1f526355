//! Fine-tuning: Adam over minibatches with per-epoch learning-rate decay,
//! best-on-validation checkpointing, and a hyperparameter grid runner.

mod adam;
mod grid;
mod runconfig;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::encoder::{
    forward, loss_and_grad, DropoutMode, EncoderError, EncoderParams,
};
use crate::eval::{accuracy, fmt4, EvalError};
use crate::tokenizer::EncodedInput;

pub use adam::{adam_step, AdamState, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use grid::{
    grid_search, grid_search_jobs, GridCellOutcome, GridCellRun, GridSpec, DEFAULT_GRID_BATCH_SIZES,
    DEFAULT_GRID_LEARNING_RATES,
};
pub use runconfig::{parse_run_config, RunConfig};

#[derive(Debug, Error)]
pub enum TrainerError {
    #[error("invalid training setup: {0}")]
    BadConfig(String),
    #[error("invalid config: key '{key}': {message}")]
    ConfigKey { key: String, message: String },
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("non-finite gradient encountered")]
    NonFiniteGradient,
    #[error(transparent)]
    Encoder(#[from] EncoderError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// Hyperparameters of one fine-tuning run. `epoch_decay` shrinks the
/// learning rate after each epoch e (1-based) by 1/(1 + decay·e); zero
/// turns decay off.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub epoch_decay: f64,
    pub seed: u64,
    pub max_len: usize,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            learning_rate: 1e-3,
            batch_size: 16,
            epochs: 10,
            epoch_decay: 1e-4,
            seed: 0,
            max_len: 128,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |msg: String| Err(TrainerError::BadConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate {} must be positive", self.learning_rate));
        }
        if self.batch_size < 1 {
            return bad("batch_size must be at least 1".into());
        }
        if self.epochs < 1 {
            return bad("epochs must be at least 1".into());
        }
        if !(self.epoch_decay >= 0.0 && self.epoch_decay.is_finite()) {
            return bad(format!("decay {} must be non-negative", self.epoch_decay));
        }
        if self.max_len < 2 || self.max_len > 512 {
            return bad(format!("max_len {} outside [2,512]", self.max_len));
        }
        Ok(())
    }
}

/// Encoded inputs paired with class labels, all padded to one length.
#[derive(Debug, Clone, Default)]
pub struct EncodedDataset {
    pub inputs: Vec<EncodedInput>,
    pub labels: Vec<usize>,
}

impl EncodedDataset {
    pub fn new(inputs: Vec<EncodedInput>, labels: Vec<usize>) -> Result<EncodedDataset, TrainerError> {
        if inputs.len() != labels.len() {
            return Err(TrainerError::BadConfig(format!(
                "{} inputs but {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        if let Some(first) = inputs.first() {
            if inputs.iter().any(|i| i.len() != first.len()) {
                return Err(TrainerError::BadConfig(
                    "inputs are not padded to one shared length".into(),
                ));
            }
        }
        Ok(EncodedDataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }
}

/// What one fine-tuning run did, epoch by epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RunHistory {
    pub train_acc: Vec<f64>,
    pub val_acc: Vec<f64>,
    pub loss: Vec<f64>,
    pub train_time_s: f64,
    /// 0-based index of the epoch whose snapshot was kept (earliest
    /// among ties on validation accuracy).
    pub best_epoch: usize,
}

impl RunHistory {
    pub fn epochs(&self) -> usize {
        self.loss.len()
    }

    pub fn avg_train_acc(&self) -> f64 {
        mean(&self.train_acc)
    }

    pub fn avg_val_acc(&self) -> f64 {
        mean(&self.val_acc)
    }

    pub fn best_val_acc(&self) -> f64 {
        self.val_acc[self.best_epoch]
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub const HISTORY_CSV_HEADER: &str = "epoch,train_acc,val_acc,loss";

/// Render a history as CSV (epochs 1-based).
pub fn render_history(history: &RunHistory) -> String {
    let mut out = String::from(HISTORY_CSV_HEADER);
    out.push('\n');
    for e in 0..history.epochs() {
        out.push_str(&format!(
            "{},{},{},{:.6}\n",
            e + 1,
            fmt4(history.train_acc[e]),
            fmt4(history.val_acc[e]),
            history.loss[e]
        ));
    }
    out
}

/// Accuracy of `params` on a dataset, evaluated in minibatches with
/// dropout off.
pub fn evaluate_accuracy(
    params: &EncoderParams,
    data: &EncodedDataset,
) -> Result<f64, TrainerError> {
    Ok(accuracy(&predict_dataset(params, data)?, &data.labels)?)
}

/// Argmax predictions for a whole dataset.
pub fn predict_dataset(
    params: &EncoderParams,
    data: &EncodedDataset,
) -> Result<Vec<usize>, TrainerError> {
    let mut preds = Vec::with_capacity(data.len());
    for chunk in data.inputs.chunks(64) {
        let (logits, _) = forward(params, chunk)?;
        preds.extend(logits.iter().map(|row| argmax(row)));
    }
    Ok(preds)
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &z) in row.iter().enumerate().skip(1) {
        if z > row[best] {
            best = i;
        }
    }
    best
}

/// Fine-tune `params`. Each epoch shuffles the training set under the
/// config seed, walks minibatches (the final short batch is kept), and takes
/// one Adam step per batch; the learning rate decays after each epoch. The
/// returned parameters are the snapshot with the highest validation
/// accuracy, earliest epoch on ties.
pub fn fine_tune(
    params: EncoderParams,
    config: &TrainConfig,
    train: &EncodedDataset,
    validation: &EncodedDataset,
) -> Result<(EncoderParams, RunHistory), TrainerError> {
    config.validate()?;
    if train.is_empty() {
        return Err(TrainerError::EmptyTrainSet);
    }
    if validation.is_empty() {
        return Err(TrainerError::BadConfig(
            "validation set is empty; best-snapshot selection needs one".into(),
        ));
    }
    let mut params = params;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut state = AdamState::new(params.param_count());
    let mut lr = config.learning_rate;
    let uses_dropout = params.config().dropout > 0.0;

    let mut train_acc = Vec::with_capacity(config.epochs);
    let mut val_acc = Vec::with_capacity(config.epochs);
    let mut loss_history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, EncoderParams)> = None;
    let start = Instant::now();

    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let inputs: Vec<EncodedInput> =
                chunk.iter().map(|&i| train.inputs[i].clone()).collect();
            let labels: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let mode = if uses_dropout {
                DropoutMode::Enabled { seed: rng.gen() }
            } else {
                DropoutMode::Disabled
            };
            let (loss, grad) = loss_and_grad(&params, &inputs, &labels, mode)?;
            adam_step(&mut params, &grad, &mut state, lr)?;
            loss_sum += loss * chunk.len() as f64;
        }
        loss_history.push(loss_sum / train.len() as f64);
        train_acc.push(evaluate_accuracy(&params, train)?);
        let epoch_val = evaluate_accuracy(&params, validation)?;
        val_acc.push(epoch_val);
        if best.as_ref().is_none_or(|(acc, _, _)| epoch_val > *acc) {
            best = Some((epoch_val, epoch - 1, params.clone()));
        }
        lr *= 1.0 / (1.0 + config.epoch_decay * epoch as f64);
    }

    let (_, best_epoch, best_params) = best.expect("epochs >= 1 always sets a snapshot");
    let history = RunHistory {
        train_acc,
        val_acc,
        loss: loss_history,
        train_time_s: start.elapsed().as_secs_f64(),
        best_epoch,
    };
    Ok((best_params, history))
}
