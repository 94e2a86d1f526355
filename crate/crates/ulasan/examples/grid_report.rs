//! Run a small hyperparameter grid (fresh encoder per cell, cells trained
//! on two threads) and render the report table.

use anyhow::{bail, Result};
use ulasan::encoder::EncoderConfig;
use ulasan::eval::{render_report, ReportFormat};
use ulasan::synthetic;
use ulasan::tokenizer::{encode, Vocab};
use ulasan::trainer::{grid_search_jobs, EncodedDataset, GridSpec, TrainConfig};

const MAX_LEN: usize = 16;

fn encode_all(data: &ulasan::synthetic::SyntheticData, vocab: &Vocab) -> Result<EncodedDataset> {
    let mut inputs = Vec::with_capacity(data.reviews.len());
    let mut labels = Vec::with_capacity(data.reviews.len());
    for (review, &label) in data.reviews.iter().zip(&data.labels) {
        inputs.push(encode(&review.content, vocab, MAX_LEN)?);
        labels.push(label.index());
    }
    Ok(EncodedDataset::new(inputs, labels)?)
}

fn main() -> Result<()> {
    let vocab = Vocab::from_tokens(synthetic::pool_vocab_tokens())?;
    let train = encode_all(&synthetic::generate(45, 1), &vocab)?;
    let validation = encode_all(&synthetic::generate(15, 2), &vocab)?;
    let test = encode_all(&synthetic::generate(15, 3), &vocab)?;

    let mut encoder = EncoderConfig::new(1, 16, 2, vocab.len());
    encoder.ffn = 32;
    encoder.max_positions = MAX_LEN;
    let base = TrainConfig {
        batch_size: 16,
        seed: 0,
        ..TrainConfig::default()
    };
    // Every cell starts from the same seed-0 initialization, so rows differ
    // only by their hyperparameters.
    let grid = GridSpec {
        learning_rates: vec![3e-3, 1e-2],
        batch_sizes: vec![8, 16],
        epoch_choices: vec![15],
    };

    let outcomes = grid_search_jobs(
        &encoder,
        &base,
        &grid,
        None,
        &train,
        &validation,
        &test,
        "encoder",
        "score",
        2,
    )?;

    let mut reports = Vec::new();
    for cell in outcomes {
        match cell.outcome {
            Ok(run) => reports.push(run.report),
            Err(message) => bail!(
                "cell lr={} batch={} failed: {message}",
                cell.learning_rate,
                cell.batch_size
            ),
        }
    }
    print!("{}", render_report(&reports, ReportFormat::Markdown));
    Ok(())
}
