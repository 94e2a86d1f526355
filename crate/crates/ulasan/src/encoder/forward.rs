//! Forward pass: embeddings, masked multi-head self-attention blocks, and
//! the [CLS] classification head.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::math::{gelu, layer_norm, linear, masked_softmax_rows, mm, softmax_row};
use super::{EncoderConfig, EncoderError, EncoderParams, ParamLayout};
use crate::tokenizer::EncodedInput;

/// Resolved offsets of every tensor for fast slicing.
pub(crate) struct Offsets {
    pub tok: usize,
    pub pos: usize,
    pub seg: usize,
    pub emb_scale: usize,
    pub emb_shift: usize,
    pub layers: Vec<LayerOffsets>,
    pub cls_w: usize,
    pub cls_b: usize,
}

pub(crate) struct LayerOffsets {
    pub qw: usize,
    pub qb: usize,
    pub kw: usize,
    pub kb: usize,
    pub vw: usize,
    pub vb: usize,
    pub ow: usize,
    pub ob: usize,
    pub ln1_scale: usize,
    pub ln1_shift: usize,
    pub f1w: usize,
    pub f1b: usize,
    pub f2w: usize,
    pub f2b: usize,
    pub ln2_scale: usize,
    pub ln2_shift: usize,
}

impl Offsets {
    pub(crate) fn new(config: &EncoderConfig) -> Offsets {
        let layout = ParamLayout::new(config);
        let at = |name: &str| layout.find(name).expect("layout covers all tensors").offset;
        Offsets {
            tok: at("emb.token"),
            pos: at("emb.position"),
            seg: at("emb.segment"),
            emb_scale: at("emb.ln.scale"),
            emb_shift: at("emb.ln.shift"),
            layers: (0..config.layers)
                .map(|i| LayerOffsets {
                    qw: at(&format!("layer{i}.attn.q.weight")),
                    qb: at(&format!("layer{i}.attn.q.bias")),
                    kw: at(&format!("layer{i}.attn.k.weight")),
                    kb: at(&format!("layer{i}.attn.k.bias")),
                    vw: at(&format!("layer{i}.attn.v.weight")),
                    vb: at(&format!("layer{i}.attn.v.bias")),
                    ow: at(&format!("layer{i}.attn.out.weight")),
                    ob: at(&format!("layer{i}.attn.out.bias")),
                    ln1_scale: at(&format!("layer{i}.attn.ln.scale")),
                    ln1_shift: at(&format!("layer{i}.attn.ln.shift")),
                    f1w: at(&format!("layer{i}.ffn.in.weight")),
                    f1b: at(&format!("layer{i}.ffn.in.bias")),
                    f2w: at(&format!("layer{i}.ffn.out.weight")),
                    f2b: at(&format!("layer{i}.ffn.out.bias")),
                    ln2_scale: at(&format!("layer{i}.ffn.ln.scale")),
                    ln2_shift: at(&format!("layer{i}.ffn.ln.shift")),
                })
                .collect(),
            cls_w: at("cls.weight"),
            cls_b: at("cls.bias"),
        }
    }
}

pub(crate) struct LayerCache {
    pub x_in: Vec<f64>,
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// Attention probabilities, heads × seq × seq.
    pub probs: Vec<f64>,
    pub context: Vec<f64>,
    /// Inverted-dropout multipliers on the attention output, if active.
    pub attn_drop: Option<Vec<f64>>,
    pub ln1_xhat: Vec<f64>,
    pub ln1_rstd: Vec<f64>,
    pub x_mid: Vec<f64>,
    pub ffn_pre: Vec<f64>,
    pub ffn_act: Vec<f64>,
    pub ffn_drop: Option<Vec<f64>>,
    pub ln2_xhat: Vec<f64>,
    pub ln2_rstd: Vec<f64>,
}

pub(crate) struct ExampleCache {
    pub ids: Vec<u32>,
    pub mask: Vec<u8>,
    pub emb_drop: Option<Vec<f64>>,
    pub emb_xhat: Vec<f64>,
    pub emb_rstd: Vec<f64>,
    pub layers: Vec<LayerCache>,
    pub final_hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Intermediate activations of one forward call, consumed by the backward
/// pass.
pub struct ForwardCache {
    pub(crate) examples: Vec<ExampleCache>,
}

pub(crate) fn check_batch(
    config: &EncoderConfig,
    batch: &[EncodedInput],
) -> Result<usize, EncoderError> {
    let first = batch
        .first()
        .ok_or_else(|| EncoderError::BadBatch("batch is empty".to_string()))?;
    let seq = first.len();
    if seq < 2 || seq > config.max_positions {
        return Err(EncoderError::BadBatch(format!(
            "sequence length {seq} outside [2,{}]",
            config.max_positions
        )));
    }
    for (i, input) in batch.iter().enumerate() {
        if input.len() != seq || input.attention_mask.len() != seq {
            return Err(EncoderError::BadBatch(format!(
                "example {i} has length {} but the batch started with {seq}",
                input.len()
            )));
        }
        if input.attention_mask[0] != 1 {
            return Err(EncoderError::BadBatch(format!(
                "example {i} masks out position 0 (the pooled token)"
            )));
        }
        if let Some(&id) = input.ids.iter().find(|&&id| id as usize >= config.vocab_size) {
            return Err(EncoderError::BadBatch(format!(
                "example {i} holds token id {id} outside vocab of {}",
                config.vocab_size
            )));
        }
    }
    Ok(seq)
}

fn dropout_mask(rng: &mut ChaCha8Rng, p: f64, len: usize) -> Vec<f64> {
    let keep = 1.0 - p;
    (0..len)
        .map(|_| {
            if rng.gen_range(0.0..1.0) < keep {
                1.0 / keep
            } else {
                0.0
            }
        })
        .collect()
}

fn apply_mask(x: &mut [f64], mask: &[f64]) {
    for (v, &m) in x.iter_mut().zip(mask) {
        *v *= m;
    }
}

pub(crate) fn forward_batch(
    params: &EncoderParams,
    batch: &[EncodedInput],
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(Vec<Vec<f64>>, ForwardCache), EncoderError> {
    let config = params.config();
    config.validate()?;
    let seq = check_batch(config, batch)?;
    let p = params.values_f64();
    let off = Offsets::new(config);
    let mut logits = Vec::with_capacity(batch.len());
    let mut examples = Vec::with_capacity(batch.len());
    for input in batch {
        let dropout = match (&mut dropout_rng, config.dropout > 0.0) {
            (Some(rng), true) => Some((config.dropout, &mut **rng)),
            _ => None,
        };
        let cache = forward_example(&p, &off, config, input, seq, dropout)?;
        logits.push(cache.logits.clone());
        examples.push(cache);
    }
    Ok((logits, ForwardCache { examples }))
}

fn forward_example(
    p: &[f64],
    off: &Offsets,
    config: &EncoderConfig,
    input: &EncodedInput,
    seq: usize,
    mut dropout: Option<(f64, &mut ChaCha8Rng)>,
) -> Result<ExampleCache, EncoderError> {
    let h = config.hidden;
    let f = config.ffn;
    let heads = config.heads;
    let dh = config.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mask = &input.attention_mask;

    // Token + position + segment embeddings, then layer norm.
    let mut emb = vec![0.0; seq * h];
    for (t, &id) in input.ids.iter().enumerate() {
        let tok_row = &p[off.tok + id as usize * h..off.tok + (id as usize + 1) * h];
        let pos_row = &p[off.pos + t * h..off.pos + (t + 1) * h];
        let seg_row = &p[off.seg..off.seg + h];
        let out = &mut emb[t * h..(t + 1) * h];
        for j in 0..h {
            out[j] = tok_row[j] + pos_row[j] + seg_row[j];
        }
    }
    let emb_drop = dropout
        .as_mut()
        .map(|(prob, rng)| dropout_mask(rng, *prob, seq * h));
    if let Some(m) = &emb_drop {
        apply_mask(&mut emb, m);
    }
    let (mut x, emb_xhat, emb_rstd) = layer_norm(
        &emb,
        &p[off.emb_scale..off.emb_scale + h],
        &p[off.emb_shift..off.emb_shift + h],
        seq,
        h,
        config.ln_eps,
    );

    let mut layers = Vec::with_capacity(config.layers);
    for lo in &off.layers {
        let x_in = x.clone();
        let q = linear(&x_in, &p[lo.qw..lo.qw + h * h], &p[lo.qb..lo.qb + h], seq, h, h);
        let k = linear(&x_in, &p[lo.kw..lo.kw + h * h], &p[lo.kb..lo.kb + h], seq, h, h);
        let v = linear(&x_in, &p[lo.vw..lo.vw + h * h], &p[lo.vb..lo.vb + h], seq, h, h);

        // Per-head scaled dot-product attention; padded key positions are
        // excluded from each softmax row.
        let mut probs = vec![0.0; heads * seq * seq];
        let mut context = vec![0.0; seq * h];
        for head in 0..heads {
            let col = head * dh;
            let mut scores = vec![0.0; seq * seq];
            for s in 0..seq {
                for t in 0..seq {
                    if mask[t] != 1 {
                        continue;
                    }
                    let mut dot = 0.0;
                    for d in 0..dh {
                        dot += q[s * h + col + d] * k[t * h + col + d];
                    }
                    scores[s * seq + t] = dot * scale;
                }
            }
            let head_probs = masked_softmax_rows(&scores, mask, seq);
            for s in 0..seq {
                for t in 0..seq {
                    let pr = head_probs[s * seq + t];
                    if pr == 0.0 {
                        continue;
                    }
                    for d in 0..dh {
                        context[s * h + col + d] += pr * v[t * h + col + d];
                    }
                }
            }
            probs[head * seq * seq..(head + 1) * seq * seq].copy_from_slice(&head_probs);
        }

        let mut attn_out = linear(
            &context,
            &p[lo.ow..lo.ow + h * h],
            &p[lo.ob..lo.ob + h],
            seq,
            h,
            h,
        );
        let attn_drop = dropout
            .as_mut()
            .map(|(prob, rng)| dropout_mask(rng, *prob, seq * h));
        if let Some(m) = &attn_drop {
            apply_mask(&mut attn_out, m);
        }
        for (o, &xi) in attn_out.iter_mut().zip(&x_in) {
            *o += xi;
        }
        let (x_mid, ln1_xhat, ln1_rstd) = layer_norm(
            &attn_out,
            &p[lo.ln1_scale..lo.ln1_scale + h],
            &p[lo.ln1_shift..lo.ln1_shift + h],
            seq,
            h,
            config.ln_eps,
        );

        let ffn_pre = linear(&x_mid, &p[lo.f1w..lo.f1w + h * f], &p[lo.f1b..lo.f1b + f], seq, h, f);
        let ffn_act: Vec<f64> = ffn_pre.iter().map(|&u| gelu(u)).collect();
        let mut ffn_out = linear(
            &ffn_act,
            &p[lo.f2w..lo.f2w + f * h],
            &p[lo.f2b..lo.f2b + h],
            seq,
            f,
            h,
        );
        let ffn_drop = dropout
            .as_mut()
            .map(|(prob, rng)| dropout_mask(rng, *prob, seq * h));
        if let Some(m) = &ffn_drop {
            apply_mask(&mut ffn_out, m);
        }
        for (o, &xm) in ffn_out.iter_mut().zip(&x_mid) {
            *o += xm;
        }
        let (x_next, ln2_xhat, ln2_rstd) = layer_norm(
            &ffn_out,
            &p[lo.ln2_scale..lo.ln2_scale + h],
            &p[lo.ln2_shift..lo.ln2_shift + h],
            seq,
            h,
            config.ln_eps,
        );

        layers.push(LayerCache {
            x_in,
            q,
            k,
            v,
            probs,
            context,
            attn_drop,
            ln1_xhat,
            ln1_rstd,
            x_mid,
            ffn_pre,
            ffn_act,
            ffn_drop,
            ln2_xhat,
            ln2_rstd,
        });
        x = x_next;
    }

    // Pool the [CLS] position and classify.
    let cls_hidden = &x[..h];
    let logits_row = {
        let w = &p[off.cls_w..off.cls_w + h * config.n_classes];
        let mut row = mm(cls_hidden, w, 1, h, config.n_classes);
        for (z, &b) in row.iter_mut().zip(&p[off.cls_b..off.cls_b + config.n_classes]) {
            *z += b;
        }
        row
    };
    if logits_row.iter().any(|z| !z.is_finite()) {
        return Err(EncoderError::NonFinite("logits".to_string()));
    }

    Ok(ExampleCache {
        ids: input.ids.clone(),
        mask: input.attention_mask.clone(),
        emb_drop,
        emb_xhat,
        emb_rstd,
        layers,
        final_hidden: x,
        logits: logits_row,
    })
}

/// Run the encoder over a batch. Returns one logit row per example plus
/// the activation cache for [`loss_and_grad`](super::loss_and_grad).
/// Dropout is inactive here (evaluation mode).
pub fn forward(
    params: &EncoderParams,
    batch: &[EncodedInput],
) -> Result<(Vec<Vec<f64>>, ForwardCache), EncoderError> {
    forward_batch(params, batch, None)
}

/// Argmax class per example (ties to the lowest class index).
pub fn predict(params: &EncoderParams, batch: &[EncodedInput]) -> Result<Vec<usize>, EncoderError> {
    let (logits, _) = forward(params, batch)?;
    Ok(logits
        .iter()
        .map(|row| {
            let mut best = 0;
            for (i, &z) in row.iter().enumerate().skip(1) {
                if z > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect())
}

/// Softmax class probabilities for one logit row.
pub fn class_probabilities(logits: &[f64]) -> Vec<f64> {
    softmax_row(logits)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::init_params;
    use crate::tokenizer::{encode, Vocab};

    pub(crate) fn tiny_vocab() -> Vocab {
        Vocab::from_tokens(
            ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "bagus", "jelek", "apl", "suka", "tidak", "biasa", "cepat", "lambat"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .unwrap()
    }

    fn tiny_setup() -> (crate::encoder::EncoderParams, Vocab) {
        let config = crate::encoder::tests::tiny_config();
        (init_params(&config, 3).unwrap(), tiny_vocab())
    }

    #[test]
    fn logits_shape_matches_batch_and_classes() {
        let (params, vocab) = tiny_setup();
        let batch = vec![
            encode("bagus suka", &vocab, 6).unwrap(),
            encode("jelek", &vocab, 6).unwrap(),
        ];
        let (logits, _) = forward(&params, &batch).unwrap();
        assert_eq!(logits.len(), 2);
        assert!(logits.iter().all(|row| row.len() == 3));
    }

    #[test]
    fn attention_rows_sum_to_one_over_unmasked() {
        let (params, vocab) = tiny_setup();
        let batch = vec![encode("bagus", &vocab, 6).unwrap()];
        let (_, cache) = forward(&params, &batch).unwrap();
        let seq = 6;
        for layer in &cache.examples[0].layers {
            for head_probs in layer.probs.chunks_exact(seq * seq) {
                for s in 0..seq {
                    let row = &head_probs[s * seq..(s + 1) * seq];
                    assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
                    // masked key positions carry zero probability
                    for p in &row[3..seq] {
                        assert_eq!(*p, 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn padded_positions_do_not_change_logits() {
        let (params, vocab) = tiny_setup();
        let short = encode("bagus suka", &vocab, 5).unwrap();
        let long = encode("bagus suka", &vocab, 6).unwrap();
        let (a, _) = forward(&params, &[short]).unwrap();
        let (b, _) = forward(&params, &[long]).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y).abs() < 1e-5, "{x} vs {y}");
        }
    }

    #[test]
    fn pad_token_ids_are_inert_under_the_mask() {
        let (params, vocab) = tiny_setup();
        let enc = encode("bagus", &vocab, 6).unwrap();
        let (a, _) = forward(&params, std::slice::from_ref(&enc)).unwrap();
        let mut doctored = enc;
        // Replace pad ids with arbitrary in-vocab ids, mask unchanged.
        for t in 3..6 {
            doctored.ids[t] = 5;
        }
        let (b, _) = forward(&params, &[doctored]).unwrap();
        for (x, y) in a[0].iter().zip(&b[0]) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn classifier_probabilities_sum_to_one() {
        let (params, vocab) = tiny_setup();
        let batch = vec![
            encode("bagus suka cepat", &vocab, 6).unwrap(),
            encode("jelek lambat", &vocab, 6).unwrap(),
        ];
        let (logits, _) = forward(&params, &batch).unwrap();
        for row in logits {
            let p = class_probabilities(&row);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mixed_length_batch_is_rejected() {
        let (params, vocab) = tiny_setup();
        let batch = vec![
            encode("bagus", &vocab, 6).unwrap(),
            encode("bagus", &vocab, 5).unwrap(),
        ];
        assert!(matches!(
            forward(&params, &batch),
            Err(EncoderError::BadBatch(_))
        ));
    }

    #[test]
    fn out_of_vocab_id_is_rejected() {
        let (params, vocab) = tiny_setup();
        let mut enc = encode("bagus", &vocab, 6).unwrap();
        enc.ids[1] = 99;
        assert!(matches!(
            forward(&params, &[enc]),
            Err(EncoderError::BadBatch(_))
        ));
    }
}
