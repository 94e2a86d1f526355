//! Ten-fold cross-validation of the five classical baselines over TF-IDF
//! features on a generated corpus.

use anyhow::Result;
use ulasan::baselines::{kfold_cv, tokenize_document, BaselineHyperparams, BaselineKind};
use ulasan::eval::fmt4;
use ulasan::labeling::Sentiment;
use ulasan::synthetic;

fn main() -> Result<()> {
    let data = synthetic::generate(150, 7);
    let documents: Vec<Vec<String>> = data
        .reviews
        .iter()
        .map(|r| tokenize_document(&r.content))
        .collect();
    let labels: Vec<usize> = data.labels.iter().map(|l| l.index()).collect();

    let hp = BaselineHyperparams::default();
    println!("10-fold CV on {} generated reviews:\n", documents.len());
    println!("{:<8} {:>8} {:>8} {:>8}", "model", "mean", "min", "max");
    for kind in BaselineKind::ALL {
        let cv = kfold_cv(
            kind,
            &documents,
            &labels,
            10,
            Sentiment::N_CLASSES,
            hp.seed,
            &hp,
        )?;
        let min = cv.fold_accuracies.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = cv.fold_accuracies.iter().cloned().fold(0.0, f64::max);
        println!(
            "{:<8} {:>8} {:>8} {:>8}",
            kind.as_str(),
            fmt4(cv.mean_accuracy),
            fmt4(min),
            fmt4(max)
        );
    }
    Ok(())
}
