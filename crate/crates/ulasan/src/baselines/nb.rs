//! Multinomial naive Bayes with Laplace smoothing.

use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::BaselinesError;

/// Multinomial naive Bayes over (possibly fractional) term counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    alpha: f64,
    // A class absent from training has a -inf prior; JSON stores it as null.
    #[serde(with = "log_prior_serde")]
    class_log_prior: Vec<f64>,
    feature_log_prob: Vec<Vec<f64>>,
    n_features: usize,
}

mod log_prior_serde {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
        let encoded: Vec<Option<f64>> = values
            .iter()
            .map(|&v| if v.is_finite() { Some(v) } else { None })
            .collect();
        encoded.serialize(serializer)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Vec<f64>, D::Error> {
        let encoded = Vec::<Option<f64>>::deserialize(deserializer)?;
        Ok(encoded
            .into_iter()
            .map(|v| v.unwrap_or(f64::NEG_INFINITY))
            .collect())
    }
}

impl MultinomialNb {
    /// Fit from sparse feature rows. Priors are empirical class frequencies;
    /// per-class feature likelihoods use Laplace smoothing with `alpha`.
    /// A class with no training rows gets a -inf log prior and is never
    /// predicted.
    pub fn fit(
        features: &[SparseVec],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
        alpha: f64,
    ) -> Result<MultinomialNb, BaselinesError> {
        super::check_training_input(features, labels, n_classes)?;
        if alpha <= 0.0 {
            return Err(BaselinesError::BadHyperparam {
                name: "nb_alpha",
                message: "must be positive".to_string(),
            });
        }
        let n = labels.len() as f64;
        let mut class_counts = vec![0usize; n_classes];
        let mut feature_sums = vec![vec![0.0f64; n_features]; n_classes];
        for (row, &label) in features.iter().zip(labels) {
            class_counts[label] += 1;
            for (&i, &v) in row.indices.iter().zip(&row.values) {
                if i >= n_features {
                    return Err(BaselinesError::DimensionMismatch {
                        expected: n_features,
                        got: i + 1,
                    });
                }
                feature_sums[label][i] += v;
            }
        }
        let class_log_prior = class_counts
            .iter()
            .map(|&c| {
                if c == 0 {
                    f64::NEG_INFINITY
                } else {
                    (c as f64 / n).ln()
                }
            })
            .collect();
        let feature_log_prob = feature_sums
            .iter()
            .map(|sums| {
                let total: f64 = sums.iter().sum::<f64>() + alpha * n_features as f64;
                sums.iter().map(|&s| ((s + alpha) / total).ln()).collect()
            })
            .collect();
        Ok(MultinomialNb {
            alpha,
            class_log_prior,
            feature_log_prob,
            n_features,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Unnormalized log posteriors: log prior + Σ x_t · log p(t|c).
    pub fn log_posteriors(&self, x: &SparseVec) -> Result<Vec<f64>, BaselinesError> {
        if x.max_index().is_some_and(|i| i >= self.n_features) {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: x.max_index().unwrap() + 1,
            });
        }
        Ok(self
            .class_log_prior
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                prior
                    + x.indices
                        .iter()
                        .zip(&x.values)
                        .map(|(&i, &v)| v * self.feature_log_prob[c][i])
                        .sum::<f64>()
            })
            .collect())
    }

    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        Ok(super::argmax_lowest(&self.log_posteriors(x)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::tfidf::tfidf_fit_transform;

    fn row(pairs: &[(usize, f64)]) -> SparseVec {
        SparseVec {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    #[test]
    fn two_word_corpus_recovers_labels() {
        let docs: Vec<Vec<String>> = vec![
            vec!["bagus".to_string()],
            vec!["jelek".to_string()],
        ];
        let (space, rows) = tfidf_fit_transform(&docs).unwrap();
        let model = MultinomialNb::fit(&rows, &[1, 0], 2, space.n_features(), 1.0).unwrap();
        assert_eq!(model.predict(&space.transform(&docs[0])).unwrap(), 1);
        assert_eq!(model.predict(&space.transform(&docs[1])).unwrap(), 0);
    }

    // Plain-loop Bayes computation over dense count matrices, written
    // separately from the sparse implementation.
    fn brute_force_log_posteriors(
        dense_rows: &[Vec<f64>],
        labels: &[usize],
        n_classes: usize,
        alpha: f64,
        query: &[f64],
    ) -> Vec<f64> {
        let n_features = dense_rows[0].len();
        let mut result = Vec::new();
        for c in 0..n_classes {
            let mut n_c = 0.0;
            for &l in labels {
                if l == c {
                    n_c += 1.0;
                }
            }
            let prior = if n_c == 0.0 {
                f64::NEG_INFINITY
            } else {
                (n_c / labels.len() as f64).ln()
            };
            let mut total = 0.0;
            let mut per_feature = vec![0.0; n_features];
            for (dense_row, &l) in dense_rows.iter().zip(labels) {
                if l == c {
                    for f in 0..n_features {
                        per_feature[f] += dense_row[f];
                        total += dense_row[f];
                    }
                }
            }
            let denom = total + alpha * n_features as f64;
            let mut log_post = prior;
            for f in 0..n_features {
                log_post += query[f] * ((per_feature[f] + alpha) / denom).ln();
            }
            result.push(log_post);
        }
        result
    }

    #[test]
    fn posteriors_match_brute_force_bayes() {
        // 6 documents, 5 terms, fractional counts.
        let rows = vec![
            row(&[(0, 2.0), (1, 1.0)]),
            row(&[(0, 1.0), (2, 3.0)]),
            row(&[(3, 1.5)]),
            row(&[(1, 0.5), (3, 0.5), (4, 1.0)]),
            row(&[(2, 2.0), (4, 2.0)]),
            row(&[(0, 1.0), (4, 1.0)]),
        ];
        let labels = vec![0, 0, 1, 1, 2, 2];
        let n_features = 5;
        let model = MultinomialNb::fit(&rows, &labels, 3, n_features, 1.0).unwrap();
        let dense: Vec<Vec<f64>> = rows.iter().map(|r| r.to_dense(n_features)).collect();
        for query in &rows {
            let got = model.log_posteriors(query).unwrap();
            let want = brute_force_log_posteriors(
                &dense,
                &labels,
                3,
                1.0,
                &query.to_dense(n_features),
            );
            for (g, w) in got.iter().zip(&want) {
                assert!((g - w).abs() < 1e-9, "got {g}, want {w}");
            }
        }
    }

    #[test]
    fn zero_vector_predicts_prior_argmax() {
        let rows = vec![
            row(&[(0, 1.0)]),
            row(&[(0, 1.0)]),
            row(&[(1, 1.0)]),
        ];
        let model = MultinomialNb::fit(&rows, &[1, 1, 0], 2, 2, 1.0).unwrap();
        // Class 1 has the larger prior (2 of 3).
        assert_eq!(model.predict(&SparseVec::empty()).unwrap(), 1);
    }

    #[test]
    fn absent_class_is_never_predicted() {
        let rows = vec![row(&[(0, 1.0)]), row(&[(1, 1.0)])];
        let model = MultinomialNb::fit(&rows, &[0, 2], 3, 2, 1.0).unwrap();
        for x in [row(&[(0, 1.0)]), row(&[(1, 1.0)]), SparseVec::empty()] {
            assert_ne!(model.predict(&x).unwrap(), 1);
        }
    }

    #[test]
    fn single_class_input_is_fatal() {
        let rows = vec![row(&[(0, 1.0)]), row(&[(1, 1.0)])];
        assert!(matches!(
            MultinomialNb::fit(&rows, &[1, 1], 3, 2, 1.0),
            Err(BaselinesError::SingleClass)
        ));
    }
}
