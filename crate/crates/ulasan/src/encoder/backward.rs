//! Loss and exact gradients: softmax cross-entropy backpropagated through
//! the classifier head, every encoder block, and the embedding tables.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::forward::{forward_batch, ExampleCache, Offsets};
use super::math::{col_sum_acc, gelu_prime, layer_norm_backward, mm_a_bt, mm_at_b_acc, softmax_row};
use super::{EncoderConfig, EncoderError, EncoderParams};
use crate::tokenizer::EncodedInput;

/// Whether training-time dropout is active. The seed makes the mask draws
/// reproducible; when the config's dropout rate is zero both modes match.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Disabled,
    Enabled { seed: u64 },
}

/// Mean cross-entropy loss over a batch plus the gradient of every
/// parameter, in layout order. Gradients are exact for the sampled
/// dropout masks, so they stay finite-difference checkable.
pub fn loss_and_grad(
    params: &EncoderParams,
    batch: &[EncodedInput],
    labels: &[usize],
    dropout: DropoutMode,
) -> Result<(f64, Vec<f64>), EncoderError> {
    let config = params.config();
    if batch.len() != labels.len() {
        return Err(EncoderError::BadBatch(format!(
            "{} examples but {} labels",
            batch.len(),
            labels.len()
        )));
    }
    for &label in labels {
        if label >= config.n_classes {
            return Err(EncoderError::LabelOutOfRange {
                label,
                n_classes: config.n_classes,
            });
        }
    }
    let mut rng = match dropout {
        DropoutMode::Disabled => None,
        DropoutMode::Enabled { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
    };
    let (_, cache) = forward_batch(params, batch, rng.as_mut())?;

    let p = params.values_f64();
    let off = Offsets::new(config);
    let mut grad = vec![0.0; p.len()];
    let inv_b = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    for (example, &label) in cache.examples.iter().zip(labels) {
        let probs = softmax_row(&example.logits);
        loss -= probs[label].ln() * inv_b;
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        for d in dlogits.iter_mut() {
            *d *= inv_b;
        }
        backward_example(&p, &off, config, example, &dlogits, &mut grad);
    }
    if !loss.is_finite() {
        return Err(EncoderError::NonFinite("loss".to_string()));
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(EncoderError::NonFinite("gradient".to_string()));
    }
    Ok((loss, grad))
}

/// Layer-norm backward where scale and shift sit adjacent in the flat
/// gradient buffer (the layout always stores `…scale` then `…shift`).
#[allow(clippy::too_many_arguments)]
fn ln_backward_into(
    grad: &mut [f64],
    scale_offset: usize,
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    scale: &[f64],
    rows: usize,
    width: usize,
) -> Vec<f64> {
    let (dscale, dshift) = grad[scale_offset..scale_offset + 2 * width].split_at_mut(width);
    layer_norm_backward(dy, xhat, rstd, scale, rows, width, dscale, dshift)
}

fn through_dropout(dy: &[f64], mask: &Option<Vec<f64>>) -> Vec<f64> {
    match mask {
        Some(m) => dy.iter().zip(m).map(|(d, &k)| d * k).collect(),
        None => dy.to_vec(),
    }
}

fn backward_example(
    p: &[f64],
    off: &Offsets,
    config: &EncoderConfig,
    ex: &ExampleCache,
    dlogits: &[f64],
    grad: &mut [f64],
) {
    let h = config.hidden;
    let f = config.ffn;
    let c = config.n_classes;
    let heads = config.heads;
    let dh = config.head_dim();
    let seq = ex.ids.len();
    let scale = 1.0 / (dh as f64).sqrt();

    // Classifier head; only the pooled row receives gradient.
    let cls_hidden = &ex.final_hidden[..h];
    mm_at_b_acc(&mut grad[off.cls_w..off.cls_w + h * c], cls_hidden, dlogits, 1, h, c);
    col_sum_acc(&mut grad[off.cls_b..off.cls_b + c], dlogits, 1, c);
    let d_cls = mm_a_bt(dlogits, &p[off.cls_w..off.cls_w + h * c], 1, c, h);
    let mut dy = vec![0.0; seq * h];
    dy[..h].copy_from_slice(&d_cls);

    for (layer, lo) in ex.layers.iter().zip(&off.layers).rev() {
        let d_res2 = ln_backward_into(
            grad,
            lo.ln2_scale,
            &dy,
            &layer.ln2_xhat,
            &layer.ln2_rstd,
            &p[lo.ln2_scale..lo.ln2_scale + h],
            seq,
            h,
        );

        // Feed-forward branch; the residual copy of d_res2 flows to x_mid.
        let d_ffn_out = through_dropout(&d_res2, &layer.ffn_drop);
        mm_at_b_acc(&mut grad[lo.f2w..lo.f2w + f * h], &layer.ffn_act, &d_ffn_out, seq, f, h);
        col_sum_acc(&mut grad[lo.f2b..lo.f2b + h], &d_ffn_out, seq, h);
        let d_act = mm_a_bt(&d_ffn_out, &p[lo.f2w..lo.f2w + f * h], seq, h, f);
        let d_pre: Vec<f64> = d_act
            .iter()
            .zip(&layer.ffn_pre)
            .map(|(d, &u)| d * gelu_prime(u))
            .collect();
        mm_at_b_acc(&mut grad[lo.f1w..lo.f1w + h * f], &layer.x_mid, &d_pre, seq, h, f);
        col_sum_acc(&mut grad[lo.f1b..lo.f1b + f], &d_pre, seq, f);
        let mut d_mid = mm_a_bt(&d_pre, &p[lo.f1w..lo.f1w + h * f], seq, f, h);
        for (dm, &dr) in d_mid.iter_mut().zip(&d_res2) {
            *dm += dr;
        }

        let d_res1 = ln_backward_into(
            grad,
            lo.ln1_scale,
            &d_mid,
            &layer.ln1_xhat,
            &layer.ln1_rstd,
            &p[lo.ln1_scale..lo.ln1_scale + h],
            seq,
            h,
        );

        // Attention output projection.
        let d_attn = through_dropout(&d_res1, &layer.attn_drop);
        mm_at_b_acc(&mut grad[lo.ow..lo.ow + h * h], &layer.context, &d_attn, seq, h, h);
        col_sum_acc(&mut grad[lo.ob..lo.ob + h], &d_attn, seq, h);
        let d_context = mm_a_bt(&d_attn, &p[lo.ow..lo.ow + h * h], seq, h, h);

        // Scaled dot-product attention, head by head. Masked key columns
        // carry zero probability, so they drop out of every sum.
        let mut dq = vec![0.0; seq * h];
        let mut dk = vec![0.0; seq * h];
        let mut dv = vec![0.0; seq * h];
        for head in 0..heads {
            let col = head * dh;
            let probs = &layer.probs[head * seq * seq..(head + 1) * seq * seq];
            let mut d_probs = vec![0.0; seq * seq];
            for s in 0..seq {
                for t in 0..seq {
                    if ex.mask[t] != 1 {
                        continue;
                    }
                    let pr = probs[s * seq + t];
                    let mut dot = 0.0;
                    for d in 0..dh {
                        let dc = d_context[s * h + col + d];
                        dot += dc * layer.v[t * h + col + d];
                        dv[t * h + col + d] += pr * dc;
                    }
                    d_probs[s * seq + t] = dot;
                }
            }
            for s in 0..seq {
                let row = &probs[s * seq..(s + 1) * seq];
                let d_row = &d_probs[s * seq..(s + 1) * seq];
                let row_dot: f64 = row.iter().zip(d_row).map(|(&a, &b)| a * b).sum();
                for t in 0..seq {
                    let ds = row[t] * (d_row[t] - row_dot) * scale;
                    if ds == 0.0 {
                        continue;
                    }
                    for d in 0..dh {
                        dq[s * h + col + d] += ds * layer.k[t * h + col + d];
                        dk[t * h + col + d] += ds * layer.q[s * h + col + d];
                    }
                }
            }
        }

        // Q/K/V projections; the residual adds d_res1 to the block input.
        let mut d_x = d_res1;
        for (din, w_off, b_off) in [(&dq, lo.qw, lo.qb), (&dk, lo.kw, lo.kb), (&dv, lo.vw, lo.vb)] {
            mm_at_b_acc(&mut grad[w_off..w_off + h * h], &layer.x_in, din, seq, h, h);
            col_sum_acc(&mut grad[b_off..b_off + h], din, seq, h);
            let dx_part = mm_a_bt(din, &p[w_off..w_off + h * h], seq, h, h);
            for (a, b) in d_x.iter_mut().zip(&dx_part) {
                *a += b;
            }
        }
        dy = d_x;
    }

    // Embedding layer norm, then scatter into the three tables.
    let d_emb_dropped = ln_backward_into(
        grad,
        off.emb_scale,
        &dy,
        &ex.emb_xhat,
        &ex.emb_rstd,
        &p[off.emb_scale..off.emb_scale + h],
        seq,
        h,
    );
    let d_emb = through_dropout(&d_emb_dropped, &ex.emb_drop);
    for (t, &id) in ex.ids.iter().enumerate() {
        let row = &d_emb[t * h..(t + 1) * h];
        let tok_off = off.tok + id as usize * h;
        for (g, &d) in grad[tok_off..tok_off + h].iter_mut().zip(row) {
            *g += d;
        }
        let pos_off = off.pos + t * h;
        for (g, &d) in grad[pos_off..pos_off + h].iter_mut().zip(row) {
            *g += d;
        }
        for (g, &d) in grad[off.seg..off.seg + h].iter_mut().zip(row) {
            *g += d;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::tests::tiny_config;
    use crate::encoder::{class_probabilities, forward, init_params};

    fn enc(ids: &[u32], content: usize) -> EncodedInput {
        let mut attention_mask = vec![0u8; ids.len()];
        attention_mask[..content].fill(1);
        EncodedInput {
            ids: ids.to_vec(),
            attention_mask,
            segment_ids: vec![0; ids.len()],
        }
    }

    fn batch_and_labels() -> (Vec<EncodedInput>, Vec<usize>) {
        (
            vec![enc(&[2, 4, 5, 3, 0, 0], 4), enc(&[2, 7, 3, 0, 0, 0], 3)],
            vec![0, 2],
        )
    }

    /// Cross-entropy computed from the forward pass only, as an oracle
    /// independent of the loss path inside `loss_and_grad`.
    fn manual_loss(params: &EncoderParams, batch: &[EncodedInput], labels: &[usize]) -> f64 {
        let (logits, _) = forward(params, batch).unwrap();
        logits
            .iter()
            .zip(labels)
            .map(|(row, &y)| -class_probabilities(row)[y].ln())
            .sum::<f64>()
            / batch.len() as f64
    }

    #[test]
    fn loss_matches_manual_cross_entropy() {
        let params = init_params(&tiny_config(), 5).unwrap();
        let (batch, labels) = batch_and_labels();
        let (loss, _) = loss_and_grad(&params, &batch, &labels, DropoutMode::Disabled).unwrap();
        let want = manual_loss(&params, &batch, &labels);
        assert!((loss - want).abs() < 1e-12, "{loss} vs {want}");
    }

    #[test]
    fn fresh_parameters_give_near_uniform_loss() {
        let params = init_params(&tiny_config(), 9).unwrap();
        let (batch, labels) = batch_and_labels();
        let (loss, _) = loss_and_grad(&params, &batch, &labels, DropoutMode::Disabled).unwrap();
        assert!((loss - 3.0f64.ln()).abs() < 0.1, "loss {loss}");
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let config = tiny_config();
        let (batch, labels) = batch_and_labels();
        for seed in [1u64, 2, 3] {
            let params = init_params(&config, seed).unwrap();
            let (_, grad) =
                loss_and_grad(&params, &batch, &labels, DropoutMode::Disabled).unwrap();
            // Small enough that curvature error sits well under the 1e-4
            // relative bound, large enough to dwarf f64 evaluation noise.
            let h = 1e-5f32;
            for (i, &g) in grad.iter().enumerate() {
                let mut plus = params.clone();
                plus.values_mut()[i] += h;
                let mut minus = params.clone();
                minus.values_mut()[i] -= h;
                // f32 storage quantizes the step; divide by the realized delta.
                let delta = plus.values()[i] as f64 - minus.values()[i] as f64;
                if delta == 0.0 {
                    continue;
                }
                let fd = (manual_loss(&plus, &batch, &labels)
                    - manual_loss(&minus, &batch, &labels))
                    / delta;
                let tol = 1e-4 * fd.abs().max(g.abs()) + 1e-8;
                assert!(
                    (fd - g).abs() <= tol,
                    "seed {seed} param {i}: fd {fd} vs analytic {g}"
                );
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences_under_dropout() {
        let mut config = tiny_config();
        config.dropout = 0.3;
        let (batch, labels) = batch_and_labels();
        let params = init_params(&config, 4).unwrap();
        let mode = DropoutMode::Enabled { seed: 11 };
        let (_, grad) = loss_and_grad(&params, &batch, &labels, mode).unwrap();
        let loss_of = |p: &EncoderParams| loss_and_grad(p, &batch, &labels, mode).unwrap().0;
        let h = 1e-5f32;
        for i in (0..params.param_count()).step_by(7) {
            let mut plus = params.clone();
            plus.values_mut()[i] += h;
            let mut minus = params.clone();
            minus.values_mut()[i] -= h;
            let delta = plus.values()[i] as f64 - minus.values()[i] as f64;
            if delta == 0.0 {
                continue;
            }
            let fd = (loss_of(&plus) - loss_of(&minus)) / delta;
            let tol = 1e-4 * fd.abs().max(grad[i].abs()) + 1e-8;
            assert!(
                (fd - grad[i]).abs() <= tol,
                "param {i}: fd {fd} vs analytic {}",
                grad[i]
            );
        }
    }

    #[test]
    fn duplicated_example_keeps_loss_and_gradient() {
        let params = init_params(&tiny_config(), 6).unwrap();
        let a = enc(&[2, 4, 8, 3, 0, 0], 4);
        let (l1, g1) =
            loss_and_grad(&params, std::slice::from_ref(&a), &[1], DropoutMode::Disabled).unwrap();
        let (l2, g2) =
            loss_and_grad(&params, &[a.clone(), a], &[1, 1], DropoutMode::Disabled).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (x, y) in g1.iter().zip(&g2) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn masked_positions_leave_no_embedding_gradient() {
        let config = tiny_config();
        let params = init_params(&config, 2).unwrap();
        // Pad id 0 appears only at masked positions; id 9 never appears.
        let batch = vec![enc(&[2, 4, 3, 0, 0, 0], 3)];
        let (_, grad) = loss_and_grad(&params, &batch, &[2], DropoutMode::Disabled).unwrap();
        let layout = params.layout();
        let h = config.hidden;
        let tok = layout.find("emb.token").unwrap().offset;
        for id in [0usize, 9] {
            assert!(
                grad[tok + id * h..tok + (id + 1) * h].iter().all(|&g| g == 0.0),
                "token id {id} got gradient"
            );
        }
        let pos = layout.find("emb.position").unwrap().offset;
        for t in 3..6 {
            assert!(grad[pos + t * h..pos + (t + 1) * h].iter().all(|&g| g == 0.0));
        }
        // Content rows do receive gradient.
        assert!(grad[tok + 4 * h..tok + 5 * h].iter().any(|&g| g != 0.0));
    }

    #[test]
    fn dropout_is_reproducible_per_seed_and_off_at_zero_rate() {
        let mut config = tiny_config();
        config.dropout = 0.3;
        let params = init_params(&config, 8).unwrap();
        let (batch, labels) = batch_and_labels();
        let on = |seed| {
            loss_and_grad(&params, &batch, &labels, DropoutMode::Enabled { seed })
                .unwrap()
                .0
        };
        assert_eq!(on(7), on(7));
        assert_ne!(on(7), on(8));

        let mut quiet = tiny_config();
        quiet.dropout = 0.0;
        let params = init_params(&quiet, 8).unwrap();
        let with = loss_and_grad(&params, &batch, &labels, DropoutMode::Enabled { seed: 7 })
            .unwrap()
            .0;
        let without = loss_and_grad(&params, &batch, &labels, DropoutMode::Disabled)
            .unwrap()
            .0;
        assert_eq!(with, without);
    }

    #[test]
    fn label_out_of_range_is_rejected() {
        let params = init_params(&tiny_config(), 1).unwrap();
        let batch = vec![enc(&[2, 4, 3, 0, 0, 0], 3)];
        assert!(matches!(
            loss_and_grad(&params, &batch, &[3], DropoutMode::Disabled),
            Err(EncoderError::LabelOutOfRange { label: 3, n_classes: 3 })
        ));
        assert!(matches!(
            loss_and_grad(&params, &batch, &[0, 1], DropoutMode::Disabled),
            Err(EncoderError::BadBatch(_))
        ));
    }

    #[test]
    fn non_finite_activations_are_reported() {
        let mut params = init_params(&tiny_config(), 1).unwrap();
        params.values_mut().fill(f32::INFINITY);
        let batch = vec![enc(&[2, 4, 3, 0, 0, 0], 3)];
        assert!(matches!(
            loss_and_grad(&params, &batch, &[0], DropoutMode::Disabled),
            Err(EncoderError::NonFinite(_))
        ));
    }
}
