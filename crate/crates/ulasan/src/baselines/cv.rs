//! k-fold cross-validation over tokenized documents.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tfidf::FeatureSpace;
use super::{train_baseline, BaselineHyperparams, BaselineKind, BaselinesError};

/// Per-fold accuracies of one cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub fold_accuracies: Vec<f64>,
    pub fold_sizes: Vec<usize>,
    pub mean_accuracy: f64,
}

/// Shuffle 0..n under `seed` and cut into k folds whose sizes differ by at
/// most one (the first n mod k folds take the extra element).
pub fn fold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, BaselinesError> {
    if k < 2 || k > n {
        return Err(BaselinesError::BadFolds { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut at = 0;
    for i in 0..k {
        let size = base + usize::from(i < rem);
        folds.push(order[at..at + size].to_vec());
        at += size;
    }
    Ok(folds)
}

/// Run k-fold cross-validation: for each fold, fit a feature space and a
/// model of `kind` on the other folds, then score accuracy on the held-out
/// fold. A class missing from some training fold logs a warning; the fold
/// still runs.
pub fn kfold_cv(
    kind: BaselineKind,
    documents: &[Vec<String>],
    labels: &[usize],
    k: usize,
    n_classes: usize,
    seed: u64,
    hp: &BaselineHyperparams,
) -> Result<CvResult, BaselinesError> {
    if documents.len() != labels.len() {
        return Err(BaselinesError::LengthMismatch {
            features: documents.len(),
            labels: labels.len(),
        });
    }
    let folds = fold_indices(documents.len(), k, seed)?;
    let mut fold_accuracies = Vec::with_capacity(k);
    let mut fold_sizes = Vec::with_capacity(k);
    for (fold_no, held_out) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != fold_no)
            .flat_map(|(_, f)| f.iter().copied())
            .collect();
        let train_docs: Vec<Vec<String>> =
            train_idx.iter().map(|&i| documents[i].clone()).collect();
        let train_labels: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
        for c in 0..n_classes {
            if !train_labels.contains(&c) {
                log::warn!("fold {fold_no}: class {c} absent from training data");
            }
        }
        let space = FeatureSpace::fit(&train_docs)?;
        let rows = space.transform_all(&train_docs);
        let model = train_baseline(
            kind,
            &rows,
            &train_labels,
            space.n_features(),
            n_classes,
            hp,
        )?;
        let mut correct = 0usize;
        for &i in held_out {
            let x = space.transform(&documents[i]);
            if model.predict(&x)? == labels[i] {
                correct += 1;
            }
        }
        fold_accuracies.push(correct as f64 / held_out.len() as f64);
        fold_sizes.push(held_out.len());
    }
    let mean_accuracy = fold_accuracies.iter().sum::<f64>() / k as f64;
    Ok(CvResult {
        fold_accuracies,
        fold_sizes,
        mean_accuracy,
    })
}
