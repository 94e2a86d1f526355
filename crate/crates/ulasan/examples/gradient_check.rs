//! Spot-check the encoder's analytic gradient against central finite
//! differences on a tiny configuration.

use anyhow::Result;
use ulasan::encoder::{class_probabilities, forward, init_params, loss_and_grad, DropoutMode};
use ulasan::encoder::{EncoderConfig, EncoderParams};
use ulasan::tokenizer::EncodedInput;

fn toy_batch() -> (Vec<EncodedInput>, Vec<usize>) {
    let input = |ids: Vec<u32>, content: usize| EncodedInput {
        attention_mask: (0..ids.len()).map(|i| u8::from(i < content)).collect(),
        segment_ids: vec![0; ids.len()],
        ids,
    };
    (
        vec![
            input(vec![2, 5, 7, 9, 3, 0], 5),
            input(vec![2, 8, 4, 3, 0, 0], 4),
        ],
        vec![1, 2],
    )
}

/// Reference loss recomputed from the public forward pass, independent of
/// the gradient code path.
fn reference_loss(params: &EncoderParams, batch: &[EncodedInput], labels: &[usize]) -> f64 {
    let (logits, _) = forward(params, batch).expect("forward");
    let sum: f64 = logits
        .iter()
        .zip(labels)
        .map(|(row, &gold)| -class_probabilities(row)[gold].ln())
        .sum();
    sum / labels.len() as f64
}

fn main() -> Result<()> {
    let mut config = EncoderConfig::new(2, 8, 2, 12);
    config.ffn = 32;
    config.max_positions = 6;
    let mut params = init_params(&config, 0)?;
    let (batch, labels) = toy_batch();

    let (loss, grad) = loss_and_grad(&params, &batch, &labels, DropoutMode::Disabled)?;
    println!("loss {loss:.6} over {} parameters", grad.len());

    // Central differences at a spread of coordinates; the step is applied
    // in f32 and the realized delta used as the denominator. Each
    // difference must satisfy |fd - grad| <= 1e-4 * max(|fd|, |grad|) + 1e-8
    // (relative bound plus an absolute floor for near-zero coordinates).
    let h = 1e-5f32;
    let mut worst: (usize, f64) = (0, 0.0);
    let mut checked = 0;
    for i in (0..grad.len()).step_by(47) {
        let original = params.values()[i];
        params.values_mut()[i] = original + h;
        let hi_x = params.values()[i];
        let hi = reference_loss(&params, &batch, &labels);
        params.values_mut()[i] = original - h;
        let lo_x = params.values()[i];
        let lo = reference_loss(&params, &batch, &labels);
        params.values_mut()[i] = original;

        let fd = (hi - lo) / (hi_x as f64 - lo_x as f64);
        let diff = (fd - grad[i]).abs();
        let tol = 1e-4 * fd.abs().max(grad[i].abs()) + 1e-8;
        if diff / tol > worst.1 {
            worst = (i, diff / tol);
        }
        checked += 1;
    }
    println!(
        "checked {checked} coordinates: worst difference at {:.2}% of tolerance (parameter {})",
        100.0 * worst.1,
        worst.0
    );
    println!("(the acceptance test sweeps every coordinate; this example samples)");
    Ok(())
}
