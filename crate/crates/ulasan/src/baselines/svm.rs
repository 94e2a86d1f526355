//! One-vs-rest linear SVM trained by stochastic subgradient descent on the
//! L2-regularized hinge loss.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::BaselinesError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyperparams {
    pub passes: usize,
    pub step: f64,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for SvmHyperparams {
    fn default() -> Self {
        SvmHyperparams {
            passes: 10,
            step: 0.01,
            lambda: 1e-4,
            seed: 0,
        }
    }
}

/// Linear one-vs-rest SVM: one weight vector and bias per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
    n_features: usize,
}

impl LinearSvm {
    /// Train per-class binary separators. Each pass visits the training
    /// rows in a freshly shuffled order drawn from a ChaCha8 stream seeded
    /// by `hp.seed`, so training is deterministic.
    pub fn fit(
        features: &[SparseVec],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
        hp: SvmHyperparams,
    ) -> Result<LinearSvm, BaselinesError> {
        super::check_training_input(features, labels, n_classes)?;
        if hp.passes == 0 || hp.step <= 0.0 || hp.lambda < 0.0 {
            return Err(BaselinesError::BadHyperparam {
                name: "svm",
                message: format!(
                    "passes {} / step {} / lambda {} out of range",
                    hp.passes, hp.step, hp.lambda
                ),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(hp.seed);
        let mut weights = vec![vec![0.0f64; n_features]; n_classes];
        let mut biases = vec![0.0f64; n_classes];
        let mut order: Vec<usize> = (0..features.len()).collect();
        for c in 0..n_classes {
            let w = &mut weights[c];
            let b = &mut biases[c];
            for _ in 0..hp.passes {
                order.shuffle(&mut rng);
                for &i in &order {
                    let x = &features[i];
                    if x.max_index().is_some_and(|idx| idx >= n_features) {
                        return Err(BaselinesError::DimensionMismatch {
                            expected: n_features,
                            got: x.max_index().unwrap() + 1,
                        });
                    }
                    let y = if labels[i] == c { 1.0 } else { -1.0 };
                    let margin = y * (sparse_dot_dense(x, w) + *b);
                    for v in w.iter_mut() {
                        *v *= 1.0 - hp.step * hp.lambda;
                    }
                    if margin < 1.0 {
                        for (&idx, &val) in x.indices.iter().zip(&x.values) {
                            w[idx] += hp.step * y * val;
                        }
                        *b += hp.step * y;
                    }
                }
            }
        }
        Ok(LinearSvm {
            weights,
            biases,
            n_features,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Per-class decision values w_c·x + b_c.
    pub fn decision_values(&self, x: &SparseVec) -> Result<Vec<f64>, BaselinesError> {
        if x.max_index().is_some_and(|i| i >= self.n_features) {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: x.max_index().unwrap() + 1,
            });
        }
        Ok(self
            .weights
            .iter()
            .zip(&self.biases)
            .map(|(w, &b)| sparse_dot_dense(x, w) + b)
            .collect())
    }

    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        Ok(super::argmax_lowest(&self.decision_values(x)?))
    }
}

fn sparse_dot_dense(x: &SparseVec, w: &[f64]) -> f64 {
    x.indices
        .iter()
        .zip(&x.values)
        .map(|(&i, &v)| v * w[i])
        .sum()
}
