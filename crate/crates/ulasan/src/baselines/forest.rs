//! Random forest: bagged CART trees with per-node feature subsampling.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tfidf::SparseVec;
use super::tree::{densify, DecisionTree, TreeHyperparams};
use super::BaselinesError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestHyperparams {
    pub n_trees: usize,
    pub tree: TreeHyperparams,
    /// Features considered per split; `None` means ⌊√d⌋ (at least 1).
    pub mtry: Option<usize>,
    /// Draw a bootstrap sample per tree; with `false` every tree sees the
    /// full training set.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestHyperparams {
    fn default() -> Self {
        ForestHyperparams {
            n_trees: 50,
            tree: TreeHyperparams::default(),
            mtry: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A bag of decision trees voting by majority.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    trees: Vec<DecisionTree>,
    n_features: usize,
    n_classes: usize,
}

impl RandomForest {
    /// Train `n_trees` trees. Tree b draws its bootstrap sample and its
    /// per-node feature subsets from a ChaCha8 stream seeded `seed + b`,
    /// making the model independent of evaluation order.
    pub fn fit(
        features: &[SparseVec],
        labels: &[usize],
        n_classes: usize,
        n_features: usize,
        hp: ForestHyperparams,
    ) -> Result<RandomForest, BaselinesError> {
        super::check_training_input(features, labels, n_classes)?;
        if hp.n_trees == 0 {
            return Err(BaselinesError::BadHyperparam {
                name: "forest_trees",
                message: "must be at least 1".to_string(),
            });
        }
        let rows = densify(features, n_features)?;
        let n = rows.len();
        let mtry = hp
            .mtry
            .unwrap_or_else(|| (n_features as f64).sqrt().floor() as usize)
            .max(1);
        let mut trees = Vec::with_capacity(hp.n_trees);
        for b in 0..hp.n_trees {
            let mut rng = ChaCha8Rng::seed_from_u64(hp.seed.wrapping_add(b as u64));
            let indices: Vec<usize> = if hp.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            trees.push(DecisionTree::fit_with_sampling(
                &rows, labels, &indices, n_classes, n_features, hp.tree, mtry, rng,
            ));
        }
        Ok(RandomForest {
            trees,
            n_features,
            n_classes,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    /// Majority vote over tree predictions; ties break to the lowest class.
    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        if x.max_index().is_some_and(|i| i >= self.n_features) {
            return Err(BaselinesError::DimensionMismatch {
                expected: self.n_features,
                got: x.max_index().unwrap() + 1,
            });
        }
        let dense = x.to_dense(self.n_features);
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict_dense(&dense)?] += 1;
        }
        Ok(super::argmax_count(&votes))
    }
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

    fn toy() -> (Vec<SparseVec>, Vec<usize>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let v = i as f64 / 12.0;
            rows.push(row(&[(0, v), (1, 1.0 - v)]));
            labels.push(if i < 6 { 0 } else { 1 });
        }
        (rows, labels)
    }

    #[test]
    fn single_tree_no_bootstrap_full_features_equals_plain_tree() {
        let (rows, labels) = toy();
        let hp = ForestHyperparams {
            n_trees: 1,
            mtry: Some(2),
            bootstrap: false,
            seed: 5,
            ..ForestHyperparams::default()
        };
        let forest = RandomForest::fit(&rows, &labels, 2, 2, hp).unwrap();
        let tree = DecisionTree::fit(&rows, &labels, 2, 2, TreeHyperparams::default()).unwrap();
        for x in &rows {
            assert_eq!(forest.predict(x).unwrap(), tree.predict(x).unwrap());
        }
    }

    #[test]
    fn prediction_is_majority_vote_of_trees() {
        let (rows, labels) = toy();
        let hp = ForestHyperparams {
            n_trees: 9,
            seed: 3,
            ..ForestHyperparams::default()
        };
        let forest = RandomForest::fit(&rows, &labels, 2, 2, hp).unwrap();
        for x in &rows {
            let mut votes = [0usize; 2];
            for tree in forest.trees() {
                votes[tree.predict(x).unwrap()] += 1;
            }
            let majority = if votes[1] > votes[0] { 1 } else { 0 };
            assert_eq!(forest.predict(x).unwrap(), majority);
        }
    }

    #[test]
    fn same_seed_reproduces_model() {
        let (rows, labels) = toy();
        let hp = ForestHyperparams {
            n_trees: 7,
            seed: 11,
            ..ForestHyperparams::default()
        };
        let a = RandomForest::fit(&rows, &labels, 2, 2, hp).unwrap();
        let b = RandomForest::fit(&rows, &labels, 2, 2, hp).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_give_different_forests() {
        let (rows, labels) = toy();
        let mk = |seed| {
            RandomForest::fit(
                &rows,
                &labels,
                2,
                2,
                ForestHyperparams {
                    n_trees: 7,
                    seed,
                    ..ForestHyperparams::default()
                },
            )
            .unwrap()
        };
        assert_ne!(mk(1), mk(2));
    }

    #[test]
    fn zero_trees_is_fatal() {
        let (rows, labels) = toy();
        assert!(matches!(
            RandomForest::fit(
                &rows,
                &labels,
                2,
                2,
                ForestHyperparams {
                    n_trees: 0,
                    ..ForestHyperparams::default()
                }
            ),
            Err(BaselinesError::BadHyperparam { .. })
        ));
    }
}
