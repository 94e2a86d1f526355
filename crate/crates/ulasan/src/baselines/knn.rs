//! k-nearest-neighbor classification under cosine distance.

use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::BaselinesError;

/// A k-NN model storing every training row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    rows: Vec<SparseVec>,
    labels: Vec<usize>,
    n_classes: usize,
    n_features: usize,
}

impl Knn {
    pub fn fit(
        features: &[SparseVec],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
        k: usize,
    ) -> Result<Knn, BaselinesError> {
        super::check_training_input(features, labels, n_classes)?;
        if k == 0 {
            return Err(BaselinesError::BadHyperparam {
                name: "knn_k",
                message: "must be at least 1".to_string(),
            });
        }
        Ok(Knn {
            k,
            rows: features.to_vec(),
            labels: labels.to_vec(),
            n_classes,
            n_features,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Cosine distance 1 − cos(a,b); zero vectors are treated as maximally
    /// distant (similarity 0).
    fn distance(a: &SparseVec, b: &SparseVec) -> f64 {
        let na = a.norm();
        let nb = b.norm();
        if na == 0.0 || nb == 0.0 {
            return 1.0;
        }
        1.0 - a.dot(b) / (na * nb)
    }

    /// Majority vote over the k nearest stored rows. Neighbor ties on
    /// distance break by lower row index; vote ties break by lower class.
    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        if x.max_index().is_some_and(|i| i >= self.n_features) {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: x.max_index().unwrap() + 1,
            });
        }
        let mut scored: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, row)| (Self::distance(x, row), i))
            .collect();
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut votes = vec![0usize; self.n_classes];
        for &(_, i) in scored.iter().take(self.k) {
            votes[self.labels[i]] += 1;
        }
        Ok(super::argmax_count(&votes))
    }
}
