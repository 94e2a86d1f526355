//! Dense kernels for the encoder: matrix products on flat row-major
//! slices, layer norm, GELU, and masked softmax, all in `f64`.

/// out = a·b with a m×k, b k×n.
pub(crate) fn mm(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), k * n);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let b_row = &b[p * n..(p + 1) * n];
            for (o, &b_pj) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * b_pj;
            }
        }
    }
    out
}

/// out += aᵀ·b with a m×k, b m×n, out k×n. Used for weight gradients
/// dW = xᵀ·dy.
pub(crate) fn mm_at_b_acc(out: &mut [f64], a: &[f64], b: &[f64], m: usize, k: usize, n: usize) {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), m * n);
    debug_assert_eq!(out.len(), k * n);
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let b_row = &b[i * n..(i + 1) * n];
        for (p, &a_ip) in a_row.iter().enumerate() {
            if a_ip == 0.0 {
                continue;
            }
            let out_row = &mut out[p * n..(p + 1) * n];
            for (o, &b_ij) in out_row.iter_mut().zip(b_row) {
                *o += a_ip * b_ij;
            }
        }
    }
}

/// out = a·bᵀ with a m×k, b n×k. Used for input gradients dx = dy·Wᵀ.
pub(crate) fn mm_a_bt(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    debug_assert_eq!(a.len(), m * k);
    debug_assert_eq!(b.len(), n * k);
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let a_row = &a[i * k..(i + 1) * k];
        let out_row = &mut out[i * n..(i + 1) * n];
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = &b[j * k..(j + 1) * k];
            let mut sum = 0.0;
            for (&x, &y) in a_row.iter().zip(b_row) {
                sum += x * y;
            }
            *o = sum;
        }
    }
    out
}

/// y[s] = x[s]·W + bias for every row of an m×k input; W is k×n.
pub(crate) fn linear(x: &[f64], w: &[f64], bias: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut y = mm(x, w, m, k, n);
    for row in y.chunks_exact_mut(n) {
        for (v, &b) in row.iter_mut().zip(bias) {
            *v += b;
        }
    }
    y
}

/// out[j] += Σ_rows dy[s][j] (bias gradient).
pub(crate) fn col_sum_acc(out: &mut [f64], dy: &[f64], m: usize, n: usize) {
    debug_assert_eq!(dy.len(), m * n);
    debug_assert_eq!(out.len(), n);
    for row in dy.chunks_exact(n) {
        for (o, &d) in out.iter_mut().zip(row) {
            *o += d;
        }
    }
}

/// Row-wise layer norm over the last dimension. Returns (y, xhat, rstd);
/// xhat and rstd feed the backward pass.
pub(crate) fn layer_norm(
    x: &[f64],
    scale: &[f64],
    shift: &[f64],
    rows: usize,
    width: usize,
    eps: f64,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut y = vec![0.0; rows * width];
    let mut xhat = vec![0.0; rows * width];
    let mut rstd = vec![0.0; rows];
    for s in 0..rows {
        let row = &x[s * width..(s + 1) * width];
        let mean = row.iter().sum::<f64>() / width as f64;
        let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / width as f64;
        let r = 1.0 / (var + eps).sqrt();
        rstd[s] = r;
        for j in 0..width {
            let h = (row[j] - mean) * r;
            xhat[s * width + j] = h;
            y[s * width + j] = h * scale[j] + shift[j];
        }
    }
    (y, xhat, rstd)
}

/// Backward of [`layer_norm`]: returns dx and accumulates dscale/dshift.
#[allow(clippy::too_many_arguments)]
pub(crate) fn layer_norm_backward(
    dy: &[f64],
    xhat: &[f64],
    rstd: &[f64],
    scale: &[f64],
    rows: usize,
    width: usize,
    dscale: &mut [f64],
    dshift: &mut [f64],
) -> Vec<f64> {
    let mut dx = vec![0.0; rows * width];
    let w = width as f64;
    for s in 0..rows {
        let dy_row = &dy[s * width..(s + 1) * width];
        let xhat_row = &xhat[s * width..(s + 1) * width];
        let mut mean_dxhat = 0.0;
        let mut mean_dxhat_xhat = 0.0;
        for j in 0..width {
            let dxhat = dy_row[j] * scale[j];
            mean_dxhat += dxhat;
            mean_dxhat_xhat += dxhat * xhat_row[j];
            dscale[j] += dy_row[j] * xhat_row[j];
            dshift[j] += dy_row[j];
        }
        mean_dxhat /= w;
        mean_dxhat_xhat /= w;
        for j in 0..width {
            let dxhat = dy_row[j] * scale[j];
            dx[s * width + j] = (dxhat - mean_dxhat - xhat_row[j] * mean_dxhat_xhat) * rstd[s];
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// GELU in the tanh approximation.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_A * x * x * x)).tanh())
}

pub(crate) fn gelu_prime(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_A * x * x * x);
    let t = u.tanh();
    let du = GELU_C * (1.0 + 3.0 * GELU_A * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du
}

/// Row-wise softmax over an S×S score matrix where only columns with
/// mask 1 participate; masked columns get probability 0.
pub(crate) fn masked_softmax_rows(scores: &[f64], mask: &[u8], s_len: usize) -> Vec<f64> {
    let mut probs = vec![0.0; s_len * s_len];
    for s in 0..s_len {
        let row = &scores[s * s_len..(s + 1) * s_len];
        let mut max = f64::NEG_INFINITY;
        for t in 0..s_len {
            if mask[t] == 1 && row[t] > max {
                max = row[t];
            }
        }
        let mut sum = 0.0;
        for t in 0..s_len {
            if mask[t] == 1 {
                let e = (row[t] - max).exp();
                probs[s * s_len + t] = e;
                sum += e;
            }
        }
        for t in 0..s_len {
            probs[s * s_len + t] /= sum;
        }
    }
    probs
}

/// Softmax over one logit row.
pub(crate) fn softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mm_against_hand_example() {
        // [1 2; 3 4] · [5 6; 7 8] = [19 22; 43 50]
        let a = [1.0, 2.0, 3.0, 4.0];
        let b = [5.0, 6.0, 7.0, 8.0];
        assert_eq!(mm(&a, &b, 2, 2, 2), vec![19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_products_agree_with_plain_mm() {
        let a: Vec<f64> = (0..6).map(|i| i as f64 + 0.5).collect(); // 2×3
        let b: Vec<f64> = (0..8).map(|i| (i as f64) * 0.3 - 1.0).collect(); // 2×4
        // aᵀ·b directly vs via explicit transpose.
        let mut at = vec![0.0; 6];
        for i in 0..2 {
            for j in 0..3 {
                at[j * 2 + i] = a[i * 3 + j];
            }
        }
        let want = mm(&at, &b, 3, 2, 4);
        let mut got = vec![0.0; 12];
        mm_at_b_acc(&mut got, &a, &b, 2, 3, 4);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }

        // a·bᵀ with b 4×3.
        let c: Vec<f64> = (0..12).map(|i| (i as f64) * 0.1).collect();
        let mut ct = vec![0.0; 12];
        for i in 0..4 {
            for j in 0..3 {
                ct[j * 4 + i] = c[i * 3 + j];
            }
        }
        let want = mm(&a, &ct, 2, 3, 4);
        let got = mm_a_bt(&a, &c, 2, 3, 4);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_norm_rows_have_zero_mean_unit_variance() {
        let x = [1.0, 2.0, 3.0, 4.0, -5.0, 0.0, 5.0, 10.0];
        let scale = [1.0; 4];
        let shift = [0.0; 4];
        let (y, _, _) = layer_norm(&x, &scale, &shift, 2, 4, 1e-12);
        for row in y.chunks_exact(4) {
            let mean: f64 = row.iter().sum::<f64>() / 4.0;
            let var: f64 = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<f64>() / 4.0;
            assert!(mean.abs() < 1e-9);
            assert!((var - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn layer_norm_backward_matches_finite_differences() {
        let x = [0.3, -1.2, 0.7, 2.0, 1.1, 0.0, -0.4, 0.9];
        let scale = [1.3, 0.8, -0.5, 1.0];
        let shift = [0.1, -0.2, 0.3, 0.0];
        let dy = [0.2, -0.7, 1.1, 0.4, -0.3, 0.6, 0.5, -1.0];
        let eps = 1e-12;
        let (_, xhat, rstd) = layer_norm(&x, &scale, &shift, 2, 4, eps);
        let mut dscale = vec![0.0; 4];
        let mut dshift = vec![0.0; 4];
        let dx = layer_norm_backward(&dy, &xhat, &rstd, &scale, 2, 4, &mut dscale, &mut dshift);

        let h = 1e-6;
        let objective = |x: &[f64], scale: &[f64], shift: &[f64]| -> f64 {
            let (y, _, _) = layer_norm(x, scale, shift, 2, 4, eps);
            y.iter().zip(&dy).map(|(a, b)| a * b).sum()
        };
        for i in 0..8 {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[i] += h;
            xm[i] -= h;
            let fd = (objective(&xp, &scale, &shift) - objective(&xm, &scale, &shift)) / (2.0 * h);
            assert!((fd - dx[i]).abs() < 1e-6, "dx[{i}]: fd {fd}, analytic {}", dx[i]);
        }
        for j in 0..4 {
            let mut sp = scale.to_vec();
            let mut sm = scale.to_vec();
            sp[j] += h;
            sm[j] -= h;
            let fd = (objective(&x, &sp, &shift) - objective(&x, &sm, &shift)) / (2.0 * h);
            assert!((fd - dscale[j]).abs() < 1e-6);
            let mut bp = shift.to_vec();
            let mut bm = shift.to_vec();
            bp[j] += h;
            bm[j] -= h;
            let fd = (objective(&x, &scale, &bp) - objective(&x, &scale, &bm)) / (2.0 * h);
            assert!((fd - dshift[j]).abs() < 1e-6);
        }
    }

    #[test]
    fn gelu_known_values_and_derivative() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841192).abs() < 1e-5);
        assert!((gelu(-1.0) + 0.158808).abs() < 1e-5);
        let h = 1e-6;
        for x in [-3.0, -1.0, -0.1, 0.0, 0.5, 2.0, 4.0] {
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_prime(x)).abs() < 1e-7, "x={x}");
        }
    }

    #[test]
    fn masked_softmax_rows_sum_to_one_over_unmasked() {
        let scores = [0.5, 1.0, -0.3, 2.0, 0.0, -1.0, 3.0, 0.2, 0.0];
        let mask = [1, 1, 0];
        let probs = masked_softmax_rows(&scores, &mask, 3);
        for s in 0..3 {
            let row = &probs[s * 3..(s + 1) * 3];
            assert!(row[2] == 0.0);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn softmax_row_is_uniform_on_equal_logits() {
        let p = softmax_row(&[0.0, 0.0, 0.0]);
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }
}
