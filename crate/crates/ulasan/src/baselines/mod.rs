//! TF-IDF features and five classical text classifiers with k-fold
//! cross-validation: k-NN, multinomial naive Bayes, linear SVM, a CART
//! decision tree, and a random forest.

mod cv;
mod forest;
mod knn;
mod nb;
mod svm;
mod tfidf;
mod tree;

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cv::{fold_indices, kfold_cv, CvResult};
pub use forest::{ForestHyperparams, RandomForest};
pub use knn::Knn;
pub use nb::MultinomialNb;
pub use svm::{LinearSvm, SvmHyperparams};
pub use tfidf::{tfidf_fit_transform, tokenize_document, FeatureSpace, SparseVec};
pub use tree::{DecisionTree, TreeHyperparams};

#[derive(Debug, Error)]
pub enum BaselinesError {
    #[error("corpus contains no terms")]
    EmptyCorpus,
    #[error("features ({features}) and labels ({labels}) differ in length")]
    LengthMismatch { features: usize, labels: usize },
    #[error("training data contains fewer than two classes")]
    SingleClass,
    #[error("feature vector needs {got} features, model has {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("hyperparameter {name}: {message}")]
    BadHyperparam { name: &'static str, message: String },
    #[error("k={k} folds invalid for n={n} (need 2 ≤ k ≤ n)")]
    BadFolds { k: usize, n: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model file {path}: {message}")]
    BadModelFile { path: String, message: String },
}

/// The five baseline classifier kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineKind {
    Knn,
    Nb,
    Svm,
    Tree,
    Forest,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::Knn,
        BaselineKind::Nb,
        BaselineKind::Svm,
        BaselineKind::Tree,
        BaselineKind::Forest,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::Knn => "knn",
            BaselineKind::Nb => "nb",
            BaselineKind::Svm => "svm",
            BaselineKind::Tree => "tree",
            BaselineKind::Forest => "forest",
        }
    }

    pub fn parse(s: &str) -> Option<BaselineKind> {
        BaselineKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

/// Hyperparameters for every baseline kind, with reproducible defaults.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineHyperparams {
    pub knn_k: usize,
    pub nb_alpha: f64,
    pub svm_passes: usize,
    pub svm_step: f64,
    pub svm_lambda: f64,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub forest_mtry: Option<usize>,
    pub forest_bootstrap: bool,
    pub seed: u64,
}

impl Default for BaselineHyperparams {
    fn default() -> Self {
        BaselineHyperparams {
            knn_k: 5,
            nb_alpha: 1.0,
            svm_passes: 10,
            svm_step: 0.01,
            svm_lambda: 1e-4,
            tree_max_depth: 20,
            tree_min_leaf: 2,
            forest_trees: 50,
            forest_mtry: None,
            forest_bootstrap: true,
            seed: 0,
        }
    }
}

impl BaselineHyperparams {
    fn svm(&self) -> SvmHyperparams {
        SvmHyperparams {
            passes: self.svm_passes,
            step: self.svm_step,
            lambda: self.svm_lambda,
            seed: self.seed,
        }
    }

    fn tree(&self) -> TreeHyperparams {
        TreeHyperparams {
            max_depth: self.tree_max_depth,
            min_leaf: self.tree_min_leaf,
        }
    }

    fn forest(&self) -> ForestHyperparams {
        ForestHyperparams {
            n_trees: self.forest_trees,
            tree: self.tree(),
            mtry: self.forest_mtry,
            bootstrap: self.forest_bootstrap,
            seed: self.seed,
        }
    }
}

/// A trained baseline classifier of any kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineModel {
    Knn(Knn),
    Nb(MultinomialNb),
    Svm(LinearSvm),
    Tree(DecisionTree),
    Forest(RandomForest),
}

impl BaselineModel {
    pub fn kind(&self) -> BaselineKind {
        match self {
            BaselineModel::Knn(_) => BaselineKind::Knn,
            BaselineModel::Nb(_) => BaselineKind::Nb,
            BaselineModel::Svm(_) => BaselineKind::Svm,
            BaselineModel::Tree(_) => BaselineKind::Tree,
            BaselineModel::Forest(_) => BaselineKind::Forest,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            BaselineModel::Knn(m) => m.n_features(),
            BaselineModel::Nb(m) => m.n_features(),
            BaselineModel::Svm(m) => m.n_features(),
            BaselineModel::Tree(m) => m.n_features(),
            BaselineModel::Forest(m) => m.n_features(),
        }
    }

    pub fn predict(&self, x: &SparseVec) -> Result<usize, BaselinesError> {
        match self {
            BaselineModel::Knn(m) => m.predict(x),
            BaselineModel::Nb(m) => m.predict(x),
            BaselineModel::Svm(m) => m.predict(x),
            BaselineModel::Tree(m) => m.predict(x),
            BaselineModel::Forest(m) => m.predict(x),
        }
    }
}

/// Train a baseline of the given kind on sparse feature rows with integer
/// class labels in `0..n_classes`.
pub fn train_baseline(
    kind: BaselineKind,
    features: &[SparseVec],
    labels: &[usize],
    n_features: usize,
    n_classes: usize,
    hp: &BaselineHyperparams,
) -> Result<BaselineModel, BaselinesError> {
    Ok(match kind {
        BaselineKind::Knn => BaselineModel::Knn(Knn::fit(
            features, labels, n_classes, n_features, hp.knn_k,
        )?),
        BaselineKind::Nb => BaselineModel::Nb(MultinomialNb::fit(
            features, labels, n_classes, n_features, hp.nb_alpha,
        )?),
        BaselineKind::Svm => BaselineModel::Svm(LinearSvm::fit(
            features,
            labels,
            n_classes,
            n_features,
            hp.svm(),
        )?),
        BaselineKind::Tree => BaselineModel::Tree(DecisionTree::fit(
            features,
            labels,
            n_classes,
            n_features,
            hp.tree(),
        )?),
        BaselineKind::Forest => BaselineModel::Forest(RandomForest::fit(
            features,
            labels,
            n_classes,
            n_features,
            hp.forest(),
        )?),
    })
}

/// Predict the class of one feature vector.
pub fn predict_baseline(model: &BaselineModel, x: &SparseVec) -> Result<usize, BaselinesError> {
    model.predict(x)
}

fn check_training_input(
    features: &[SparseVec],
    labels: &[usize],
    n_classes: usize,
) -> Result<(), BaselinesError> {
    if features.len() != labels.len() {
        return Err(BaselinesError::LengthMismatch {
            features: features.len(),
            labels: labels.len(),
        });
    }
    let mut present = vec![false; n_classes];
    for &l in labels {
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(BaselinesError::SingleClass);
    }
    Ok(())
}

/// Argmax over scores; ties resolve to the lowest index.
fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Argmax over counts; ties resolve to the lowest index.
fn argmax_count(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate().skip(1) {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// On-disk model container: version tag, kind, hyperparameters, the fitted
/// feature space, and the model parameters, as one JSON document.
#[derive(Debug, Serialize, Deserialize)]
pub struct SavedBaseline {
    pub format: String,
    pub version: u32,
    pub hyperparams: BaselineHyperparams,
    pub feature_space: FeatureSpace,
    pub model: BaselineModel,
}

pub const BASELINE_FORMAT: &str = "ulasan-baseline";
pub const BASELINE_VERSION: u32 = 1;

pub fn save_baseline(
    model: &BaselineModel,
    hp: &BaselineHyperparams,
    space: &FeatureSpace,
    path: &Path,
) -> Result<(), BaselinesError> {
    let io_err = |e: std::io::Error| BaselinesError::Io {
        path: path.display().to_string(),
        source: e,
    };
    let file = File::create(path).map_err(io_err)?;
    let saved = SavedBaseline {
        format: BASELINE_FORMAT.to_string(),
        version: BASELINE_VERSION,
        hyperparams: *hp,
        feature_space: space.clone(),
        model: model.clone(),
    };
    serde_json::to_writer(BufWriter::new(file), &saved).map_err(|e| {
        BaselinesError::BadModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        }
    })
}

pub fn load_baseline(path: &Path) -> Result<SavedBaseline, BaselinesError> {
    let file = File::open(path).map_err(|e| BaselinesError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let saved: SavedBaseline =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| {
            BaselinesError::BadModelFile {
                path: path.display().to_string(),
                message: e.to_string(),
            }
        })?;
    if saved.format != BASELINE_FORMAT {
        return Err(BaselinesError::BadModelFile {
            path: path.display().to_string(),
            message: format!("unexpected format tag `{}`", saved.format),
        });
    }
    if saved.version != BASELINE_VERSION {
        return Err(BaselinesError::BadModelFile {
            path: path.display().to_string(),
            message: format!("unsupported version {}", saved.version),
        });
    }
    Ok(saved)
}
