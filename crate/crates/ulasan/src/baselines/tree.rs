//! CART decision tree with Gini impurity.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::BaselinesError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeHyperparams {
    pub max_depth: usize,
    pub min_leaf: usize,
}

impl Default for TreeHyperparams {
    fn default() -> Self {
        TreeHyperparams {
            max_depth: 20,
            min_leaf: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Leaf {
        class: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// A fitted CART tree. Rows with feature value ≤ threshold go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    root: usize,
    n_features: usize,
    n_classes: usize,
}

impl DecisionTree {
    pub fn fit(
        features: &[SparseVec],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
        hp: TreeHyperparams,
    ) -> Result<DecisionTree, BaselinesError> {
        super::check_training_input(features, labels, n_classes)?;
        let rows = densify(features, n_features)?;
        // mtry = n_features disables per-node feature sampling entirely,
        // so a forest tree with the full feature set matches this one.
        let mut builder = TreeBuilder {
            rows: &rows,
            labels,
            n_classes,
            hp,
            mtry: n_features,
            rng: ChaCha8Rng::seed_from_u64(0),
            nodes: Vec::new(),
        };
        let indices: Vec<usize> = (0..rows.len()).collect();
        let root = builder.build(&indices, 0);
        Ok(DecisionTree {
            nodes: builder.nodes,
            root,
            n_features,
            n_classes,
        })
    }

    #[allow(clippy::too_many_arguments)]
    pub(super) fn fit_with_sampling(
        rows: &[Vec<f64>],
        labels: &[usize],
        indices: &[usize],
        n_classes: usize,
        n_features: usize,
        hp: TreeHyperparams,
        mtry: usize,
        rng: ChaCha8Rng,
    ) -> DecisionTree {
        let mut builder = TreeBuilder {
            rows,
            labels,
            n_classes,
            hp,
            mtry: mtry.min(n_features).max(1),
            rng,
            nodes: Vec::new(),
        };
        let root = builder.build(indices, 0);
        DecisionTree {
            nodes: builder.nodes,
            root,
            n_features,
            n_classes,
        }
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, self.root)
    }

    pub fn predict_dense(&self, row: &[f64]) -> Result<usize, BaselinesError> {
        if row.len() != self.n_features {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: row.len(),
            });
        }
        let mut at = self.root;
        loop {
            match self.nodes[at] {
                Node::Leaf { class } => return Ok(class),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        if x.max_index().is_some_and(|i| i >= self.n_features) {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: x.max_index().unwrap() + 1,
            });
        }
        self.predict_dense(&x.to_dense(self.n_features))
    }
}

pub(super) fn densify(
    features: &[SparseVec],
    n_features: usize,
) -> Result<Vec<Vec<f64>>, BaselinesError> {
    features
        .iter()
        .map(|x| {
            if x.max_index().is_some_and(|i| i >= n_features) {
                Err(BaselinesError::DimensionMismatch {
                    expected: n_features,
                    got: x.max_index().unwrap() + 1,
                })
            } else {
                Ok(x.to_dense(n_features))
            }
        })
        .collect()
}

struct TreeBuilder<'a> {
    rows: &'a [Vec<f64>],
    labels: &'a [usize],
    n_classes: usize,
    hp: TreeHyperparams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, indices: &[usize], depth: usize) -> usize {
        let counts = self.class_counts(indices);
        let n = indices.len();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.hp.max_depth || n < 2 * self.hp.min_leaf {
            return self.push_leaf(&counts);
        }
        match self.best_split(indices) {
            None => self.push_leaf(&counts),
            Some((feature, threshold)) => {
                let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
                    .iter()
                    .partition(|&&i| self.rows[i][feature] <= threshold);
                let left = self.build(&left_idx, depth + 1);
                let right = self.build(&right_idx, depth + 1);
                self.nodes.push(Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                });
                self.nodes.len() - 1
            }
        }
    }

    fn class_counts(&self, indices: &[usize]) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &i in indices {
            counts[self.labels[i]] += 1;
        }
        counts
    }

    fn push_leaf(&mut self, counts: &[usize]) -> usize {
        self.nodes.push(Node::Leaf {
            class: super::argmax_count(counts),
        });
        self.nodes.len() - 1
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let d = self.rows[0].len();
        if self.mtry >= d {
            return (0..d).collect();
        }
        let mut all: Vec<usize> = (0..d).collect();
        all.partial_shuffle(&mut self.rng, self.mtry);
        let mut picked: Vec<usize> = all[..self.mtry].to_vec();
        picked.sort_unstable();
        picked
    }

    /// Best (feature, threshold) by weighted Gini impurity. Thresholds are
    /// midpoints between consecutive distinct values; splits leaving a
    /// child below min_leaf are skipped. Ties keep the first candidate in
    /// (feature, threshold) order.
    fn best_split(&mut self, indices: &[usize]) -> Option<(usize, f64)> {
        let n = indices.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in self.candidate_features() {
            let mut values: Vec<(f64, usize)> = indices
                .iter()
                .map(|&i| (self.rows[i][feature], self.labels[i]))
                .collect();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            let mut left_counts = vec![0usize; self.n_classes];
            let mut right_counts = self.class_counts(indices);
            for i in 0..values.len() - 1 {
                left_counts[values[i].1] += 1;
                right_counts[values[i].1] -= 1;
                if values[i].0 == values[i + 1].0 {
                    continue;
                }
                let n_left = i + 1;
                let n_right = values.len() - n_left;
                if n_left < self.hp.min_leaf || n_right < self.hp.min_leaf {
                    continue;
                }
                let score = (n_left as f64 * gini(&left_counts)
                    + n_right as f64 * gini(&right_counts))
                    / n;
                if best.is_none() || score < best.unwrap().0 {
                    let threshold = (values[i].0 + values[i + 1].0) / 2.0;
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, feature, threshold)| (feature, threshold))
    }
}

fn gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts
        .iter()
        .map(|&c| {
            let p = c as f64 / t;
            p * p
        })
        .sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(pairs: &[(usize, f64)]) -> SparseVec {
        SparseVec {
            indices: pairs.iter().map(|p| p.0).collect(),
            values: pairs.iter().map(|p| p.1).collect(),
        }
    }

    #[test]
    fn separable_one_feature_data_fits_perfectly() {
        let rows: Vec<SparseVec> = [0.1, 0.2, 0.3, 0.8, 0.9, 1.0]
            .iter()
            .map(|&v| row(&[(0, v)]))
            .collect();
        let labels = vec![0, 0, 0, 1, 1, 1];
        let tree = DecisionTree::fit(&rows, &labels, 2, 1, TreeHyperparams::default()).unwrap();
        for (x, &l) in rows.iter().zip(&labels) {
            assert_eq!(tree.predict(x).unwrap(), l);
        }
    }

    #[test]
    fn gini_of_pure_and_even_counts() {
        assert_eq!(gini(&[4, 0]), 0.0);
        assert!((gini(&[2, 2]) - 0.5).abs() < 1e-12);
        assert!((gini(&[1, 1, 1]) - (1.0 - 3.0 * (1.0f64 / 9.0))).abs() < 1e-12);
    }

    #[test]
    fn depth_limit_is_respected() {
        // Alternating labels along one axis force deep splits.
        let rows: Vec<SparseVec> = (0..32).map(|i| row(&[(0, i as f64)])).collect();
        let labels: Vec<usize> = (0..32).map(|i| i % 2).collect();
        let hp = TreeHyperparams {
            max_depth: 3,
            min_leaf: 1,
        };
        let tree = DecisionTree::fit(&rows, &labels, 2, 1, hp).unwrap();
        assert!(tree.depth() <= 3, "depth {} exceeds cap", tree.depth());
    }

    #[test]
    fn min_leaf_blocks_tiny_children() {
        let rows: Vec<SparseVec> = (0..8).map(|i| row(&[(0, i as f64)])).collect();
        // One stray positive at the end; min_leaf 3 forbids isolating it.
        let labels = vec![0, 0, 0, 0, 0, 0, 0, 1];
        let hp = TreeHyperparams {
            max_depth: 20,
            min_leaf: 3,
        };
        let tree = DecisionTree::fit(&rows, &labels, 2, 1, hp).unwrap();
        assert_eq!(tree.predict(&row(&[(0, 7.0)])).unwrap(), 0);
    }

    #[test]
    fn fitting_is_deterministic() {
        let rows: Vec<SparseVec> = (0..30)
            .map(|i| row(&[(0, (i % 7) as f64), (1, (i % 3) as f64)]))
            .collect();
        let labels: Vec<usize> = (0..30).map(|i| (i / 10) % 3).collect();
        let a = DecisionTree::fit(&rows, &labels, 3, 2, TreeHyperparams::default()).unwrap();
        let b = DecisionTree::fit(&rows, &labels, 3, 2, TreeHyperparams::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn two_feature_xor_needs_depth_two() {
        let rows = vec![
            row(&[(0, 0.0), (1, 0.0)]),
            row(&[(0, 0.0), (1, 1.0)]),
            row(&[(0, 1.0), (1, 0.0)]),
            row(&[(0, 1.0), (1, 1.0)]),
        ];
        let labels = vec![0, 1, 1, 0];
        let hp = TreeHyperparams {
            max_depth: 4,
            min_leaf: 1,
        };
        let tree = DecisionTree::fit(&rows, &labels, 2, 2, hp).unwrap();
        for (x, &l) in rows.iter().zip(&labels) {
            assert_eq!(tree.predict(x).unwrap(), l);
        }
        assert!(tree.depth() >= 2);
    }
}
