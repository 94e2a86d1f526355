//! Accuracy, confusion matrices, and tabular run reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot evaluate an empty prediction list")]
    Empty,
    #[error("prediction/gold length mismatch: {predictions} vs {golds}")]
    LengthMismatch { predictions: usize, golds: usize },
    #[error("label {label} outside class range 0..{n_classes}")]
    LabelOutOfRange { label: usize, n_classes: usize },
    #[error("malformed report row {row}: {message}")]
    MalformedReport { row: usize, message: String },
}

/// Fraction of predictions matching their gold labels.
///
/// For two classes this is exactly (TP+TN)/(TP+TN+FP+FN); for more classes
/// it generalizes to correct/total.
pub fn accuracy(predictions: &[usize], golds: &[usize]) -> Result<f64, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    if predictions.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| p == g)
        .count();
    Ok(correct as f64 / predictions.len() as f64)
}

/// Per-class tally of (gold, predicted) pairs. Rows index the gold class,
/// columns the predicted class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n_classes: usize,
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    /// Count of examples with gold class `gold` predicted as `predicted`.
    pub fn count(&self, gold: usize, predicted: usize) -> usize {
        self.counts[gold][predicted]
    }

    /// Total number of evaluated examples.
    pub fn total(&self) -> usize {
        self.counts.iter().map(|row| row.iter().sum::<usize>()).sum()
    }

    /// Sum of the diagonal (correctly classified examples).
    pub fn trace(&self) -> usize {
        (0..self.n_classes).map(|c| self.counts[c][c]).sum()
    }

    /// One-vs-rest true positives for class `c`.
    pub fn true_positives(&self, c: usize) -> usize {
        self.counts[c][c]
    }

    /// One-vs-rest false positives for class `c`: predicted `c`, gold elsewhere.
    pub fn false_positives(&self, c: usize) -> usize {
        (0..self.n_classes)
            .filter(|&g| g != c)
            .map(|g| self.counts[g][c])
            .sum()
    }

    /// One-vs-rest false negatives for class `c`: gold `c`, predicted elsewhere.
    pub fn false_negatives(&self, c: usize) -> usize {
        (0..self.n_classes)
            .filter(|&p| p != c)
            .map(|p| self.counts[c][p])
            .sum()
    }

    /// One-vs-rest true negatives for class `c`.
    pub fn true_negatives(&self, c: usize) -> usize {
        self.total() - self.true_positives(c) - self.false_positives(c) - self.false_negatives(c)
    }

    /// Render the raw counts as lines of `gold,predicted,count`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("gold,predicted,count\n");
        for g in 0..self.n_classes {
            for p in 0..self.n_classes {
                out.push_str(&format!("{g},{p},{}\n", self.counts[g][p]));
            }
        }
        out
    }
}

/// Tally (gold, predicted) pairs into an `n_classes` × `n_classes` matrix.
pub fn confusion(
    predictions: &[usize],
    golds: &[usize],
    n_classes: usize,
) -> Result<ConfusionMatrix, EvalError> {
    if predictions.len() != golds.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            golds: golds.len(),
        });
    }
    let mut counts = vec![vec![0usize; n_classes]; n_classes];
    for (&p, &g) in predictions.iter().zip(golds) {
        for &label in [p, g].iter() {
            if label >= n_classes {
                return Err(EvalError::LabelOutOfRange { label, n_classes });
            }
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { n_classes, counts })
}

/// One fine-tuning run (one grid cell): the row type of the tabular reports.
///
/// `avg_train_acc` and `avg_val_acc` are means over the per-epoch accuracies
/// of the run; `test_acc` is the best-on-validation snapshot evaluated on the
/// held-out test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub model: String,
    pub labeling: String,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub avg_train_acc: f64,
    pub avg_val_acc: f64,
    pub train_time_s: f64,
    pub test_acc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl ReportFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(ReportFormat::Csv),
            "markdown" | "md" => Some(ReportFormat::Markdown),
            _ => None,
        }
    }
}

/// Fixed column order of the CSV report rendering.
pub const REPORT_CSV_HEADER: &str =
    "model,labeling,batch_size,learning_rate,epochs,avg_train_acc,avg_val_acc,train_time_s,test_acc";

/// Format a value to four decimal places, rounding half to even.
pub fn fmt4(x: f64) -> String {
    format!("{:.4}", (x * 10_000.0).round_ties_even() / 10_000.0)
}

/// Format seconds as a zero-padded minutes+seconds string, e.g. `09min 45s`.
/// Seconds are rounded down to whole seconds.
pub fn format_duration_min_s(seconds: f64) -> String {
    let total = seconds.max(0.0) as u64;
    format!("{:02}min {:02}s", total / 60, total % 60)
}

/// Render run reports as CSV or a Markdown table. Accuracies are printed to
/// four decimal places in both formats; the CSV carries raw seconds while the
/// Markdown table shows the minutes+seconds form.
pub fn render_report(rows: &[RunReport], format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => {
            let mut out = String::from(REPORT_CSV_HEADER);
            out.push('\n');
            for r in rows {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{:.1},{}\n",
                    r.model,
                    r.labeling,
                    r.batch_size,
                    r.learning_rate,
                    r.epochs,
                    fmt4(r.avg_train_acc),
                    fmt4(r.avg_val_acc),
                    r.train_time_s,
                    fmt4(r.test_acc),
                ));
            }
            out
        }
        ReportFormat::Markdown => {
            let mut out = String::from(
                "| Model | Labeling | Batch Size | Learning Rate | Epochs | Avg Training Accuracy | Avg Validation Accuracy | Training Time | Test Accuracy |\n\
                 |---|---|---|---|---|---|---|---|---|\n",
            );
            for r in rows {
                out.push_str(&format!(
                    "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                    r.model,
                    r.labeling,
                    r.batch_size,
                    r.learning_rate,
                    r.epochs,
                    fmt4(r.avg_train_acc),
                    fmt4(r.avg_val_acc),
                    format_duration_min_s(r.train_time_s),
                    fmt4(r.test_acc),
                ));
            }
            out
        }
    }
}

/// Parse rows previously written by [`render_report`] in CSV form.
pub fn parse_report_csv(text: &str) -> Result<Vec<RunReport>, EvalError> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != REPORT_CSV_HEADER {
                return Err(EvalError::MalformedReport {
                    row: 0,
                    message: format!("unexpected header `{line}`"),
                });
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(EvalError::MalformedReport {
                row: i,
                message: format!("expected 9 fields, got {}", fields.len()),
            });
        }
        let parse_f = |s: &str, row: usize| -> Result<f64, EvalError> {
            s.parse().map_err(|_| EvalError::MalformedReport {
                row,
                message: format!("not a number: `{s}`"),
            })
        };
        let parse_u = |s: &str, row: usize| -> Result<usize, EvalError> {
            s.parse().map_err(|_| EvalError::MalformedReport {
                row,
                message: format!("not an integer: `{s}`"),
            })
        };
        rows.push(RunReport {
            model: fields[0].to_string(),
            labeling: fields[1].to_string(),
            batch_size: parse_u(fields[2], i)?,
            learning_rate: parse_f(fields[3], i)?,
            epochs: parse_u(fields[4], i)?,
            avg_train_acc: parse_f(fields[5], i)?,
            avg_val_acc: parse_f(fields[6], i)?,
            train_time_s: parse_f(fields[7], i)?,
            test_acc: parse_f(fields[8], i)?,
        });
    }
    Ok(rows)
}
