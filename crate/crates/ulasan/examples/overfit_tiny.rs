//! Fine-tune a small encoder on a generated lexicon-separable corpus until
//! it fits the training set.

use anyhow::Result;
use ulasan::encoder::{init_params, EncoderConfig};
use ulasan::eval::fmt4;
use ulasan::synthetic;
use ulasan::tokenizer::{encode, Vocab};
use ulasan::trainer::{evaluate_accuracy, fine_tune, EncodedDataset, TrainConfig};

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
    let train = synthetic::generate(60, 5);
    let validation = synthetic::generate(18, 6);
    let vocab = Vocab::from_tokens(synthetic::pool_vocab_tokens())?;
    let train_set = encode_all(&train, &vocab)?;
    let val_set = encode_all(&validation, &vocab)?;

    let mut encoder = EncoderConfig::new(1, 32, 2, vocab.len());
    encoder.ffn = 64;
    encoder.max_positions = MAX_LEN;
    let config = TrainConfig {
        learning_rate: 3e-3,
        batch_size: 16,
        epochs: 30,
        seed: 0,
        ..TrainConfig::default()
    };

    let params = init_params(&encoder, config.seed)?;
    let (best, history) = fine_tune(params, &config, &train_set, &val_set)?;

    println!("epoch  train_acc  val_acc  loss");
    for e in 0..history.epochs() {
        println!(
            "{:>5}  {:>9}  {:>7}  {:.4}",
            e + 1,
            fmt4(history.train_acc[e]),
            fmt4(history.val_acc[e]),
            history.loss[e]
        );
    }
    println!(
        "\nkept epoch {} snapshot: train accuracy {}, validation accuracy {}",
        history.best_epoch + 1,
        fmt4(evaluate_accuracy(&best, &train_set)?),
        fmt4(history.best_val_acc())
    );
    Ok(())
}
