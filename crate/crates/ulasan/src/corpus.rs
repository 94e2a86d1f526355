//! Review dataset loading, validation, cleaning, and splitting.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path} is missing required column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("cannot split an empty example list")]
    EmptyInput,
    #[error("split ratios {0:?} do not sum to 1")]
    BadRatios((f64, f64, f64)),
    #[error("ratios {ratios:?} leave the {part} part empty at n={n}")]
    EmptyPart {
        part: &'static str,
        ratios: (f64, f64, f64),
        n: usize,
    },
    #[error("unknown review file format `{0}` (expected csv or jsonl)")]
    UnknownFormat(String),
}

/// One scraped app-store review row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewRecord {
    pub review_id: String,
    pub username: String,
    pub user_image: String,
    pub content: String,
    pub score: u8,
    pub review_date: String,
}

impl ReviewRecord {
    /// Checks the row invariants: score in 1..=5 and non-blank content.
    pub fn validate(&self) -> Result<(), String> {
        if !(1..=5).contains(&self.score) {
            return Err(format!("score {} outside [1,5]", self.score));
        }
        if self.content.trim().is_empty() {
            return Err("content is empty".to_string());
        }
        Ok(())
    }
}

/// Canonical column order of review CSV files.
pub const REVIEW_CSV_HEADER: [&str; 6] = [
    "review_id",
    "username",
    "user_image",
    "content",
    "score",
    "review_date",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReviewFormat {
    Csv,
    Jsonl,
}

impl ReviewFormat {
    pub fn parse(s: &str) -> Result<Self, CorpusError> {
        match s {
            "csv" => Ok(ReviewFormat::Csv),
            "jsonl" => Ok(ReviewFormat::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

/// A row that failed validation, with its 1-based data row number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowRejection {
    pub row: usize,
    pub reason: String,
}

impl fmt::Display for RowRejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.reason)
    }
}

/// Result of loading a review file: valid records in file order plus
/// per-row rejections. `records.len() + rejections.len()` equals the
/// number of data rows in the file.
#[derive(Debug, Clone)]
pub struct LoadedReviews {
    pub records: Vec<ReviewRecord>,
    pub rejections: Vec<RowRejection>,
}

impl LoadedReviews {
    pub fn total_rows(&self) -> usize {
        self.records.len() + self.rejections.len()
    }
}

/// Load reviews from a CSV or JSONL export.
///
/// CSV files must carry a header naming at least `content` and `score`;
/// the remaining canonical columns default to empty strings when absent.
/// JSONL files hold one object per line with the same keys. Rows violating
/// the record invariants are collected as rejections rather than aborting
/// the load.
pub fn load_reviews(path: &Path, format: ReviewFormat) -> Result<LoadedReviews, CorpusError> {
    match format {
        ReviewFormat::Csv => load_reviews_csv(path),
        ReviewFormat::Jsonl => load_reviews_jsonl(path),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CorpusError {
    CorpusError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_reviews_csv(path: &Path) -> Result<LoadedReviews, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| CorpusError::Csv {
            path: path.display().to_string(),
            source: e,
        })?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h == name);
    let content_col = col("content").ok_or_else(|| CorpusError::MissingColumn {
        path: path.display().to_string(),
        column: "content".to_string(),
    })?;
    let score_col = col("score").ok_or_else(|| CorpusError::MissingColumn {
        path: path.display().to_string(),
        column: "score".to_string(),
    })?;
    let id_col = col("review_id");
    let user_col = col("username");
    let image_col = col("user_image");
    let date_col = col("review_date");

    let mut records = Vec::new();
    let mut rejections = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row_no = i + 1;
        let row = match row {
            Ok(r) => r,
            Err(e) => {
                rejections.push(RowRejection {
                    row: row_no,
                    reason: format!("unparseable row: {e}"),
                });
                continue;
            }
        };
        let field = |idx: Option<usize>| idx.and_then(|c| row.get(c)).unwrap_or("").to_string();
        let score_text = field(Some(score_col));
        let score: i64 = match score_text.trim().parse() {
            Ok(s) => s,
            Err(_) => {
                rejections.push(RowRejection {
                    row: row_no,
                    reason: format!("score `{score_text}` is not an integer"),
                });
                continue;
            }
        };
        push_validated(
            ReviewRecord {
                review_id: field(id_col),
                username: field(user_col),
                user_image: field(image_col),
                content: field(Some(content_col)),
                score: score.clamp(0, u8::MAX as i64) as u8,
                review_date: field(date_col),
            },
            score,
            row_no,
            &mut records,
            &mut rejections,
        );
    }
    Ok(LoadedReviews {
        records,
        rejections,
    })
}

fn load_reviews_jsonl(path: &Path) -> Result<LoadedReviews, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut records = Vec::new();
    let mut rejections = Vec::new();
    let mut row_no = 0usize;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row_no += 1;
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                rejections.push(RowRejection {
                    row: row_no,
                    reason: format!("invalid json: {e}"),
                });
                continue;
            }
        };
        let text = |key: &str| {
            value
                .get(key)
                .and_then(|v| v.as_str())
                .unwrap_or("")
                .to_string()
        };
        let score = match value.get("score").and_then(|v| v.as_i64()) {
            Some(s) => s,
            None => {
                rejections.push(RowRejection {
                    row: row_no,
                    reason: "missing or non-integer `score`".to_string(),
                });
                continue;
            }
        };
        push_validated(
            ReviewRecord {
                review_id: text("review_id"),
                username: text("username"),
                user_image: text("user_image"),
                content: text("content"),
                score: score.clamp(0, u8::MAX as i64) as u8,
                review_date: text("review_date"),
            },
            score,
            row_no,
            &mut records,
            &mut rejections,
        );
    }
    Ok(LoadedReviews {
        records,
        rejections,
    })
}

fn push_validated(
    record: ReviewRecord,
    raw_score: i64,
    row_no: usize,
    records: &mut Vec<ReviewRecord>,
    rejections: &mut Vec<RowRejection>,
) {
    if !(1..=5).contains(&raw_score) {
        rejections.push(RowRejection {
            row: row_no,
            reason: format!("score {raw_score} outside [1,5]"),
        });
        return;
    }
    if let Err(reason) = record.validate() {
        rejections.push(RowRejection {
            row: row_no,
            reason,
        });
        return;
    }
    records.push(record);
}

/// Write records in the canonical CSV layout.
pub fn write_reviews_csv(records: &[ReviewRecord], path: &Path) -> Result<(), CorpusError> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = csv::Writer::from_writer(file);
    writer
        .write_record(REVIEW_CSV_HEADER)
        .map_err(|e| CorpusError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
    for r in records {
        writer
            .write_record([
                r.review_id.as_str(),
                r.username.as_str(),
                r.user_image.as_str(),
                r.content.as_str(),
                &r.score.to_string(),
                r.review_date.as_str(),
            ])
            .map_err(|e| CorpusError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
    }
    writer.flush().map_err(|e| io_err(path, e))?;
    Ok(())
}

/// Drop records whose `review_id` was already seen, keeping first occurrences.
pub fn dedup_by_id(records: Vec<ReviewRecord>) -> Vec<ReviewRecord> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .filter(|r| seen.insert(r.review_id.clone()))
        .collect()
}

/// Clean review text for labeling and feature extraction.
///
/// Lowercases, deletes every digit, drops whitespace-delimited tokens that
/// match a keyword (app names plus any stopwords), and collapses runs of
/// whitespace. Keywords are compared after the same lowercasing and digit
/// removal stage, so they should be supplied in lowercase without digits.
/// No stemming is applied; morphology passes through untouched.
pub fn preprocess(text: &str, keywords: &[String]) -> String {
    let lowered = text.to_lowercase();
    let no_digits: String = lowered.chars().filter(|c| !c.is_ascii_digit()).collect();
    let keyword_set: HashSet<&str> = keywords.iter().map(|k| k.as_str()).collect();
    no_digits
        .split_whitespace()
        .filter(|token| !keyword_set.contains(token))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Read a keyword/stopword file: one token per line, `#` comments and blank
/// lines ignored, entries lowercased.
pub fn load_token_list(path: &Path) -> Result<Vec<String>, CorpusError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut tokens = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| io_err(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        tokens.push(trimmed.to_lowercase());
    }
    Ok(tokens)
}

/// Train/validation/test partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetSplit<T> {
    pub train: Vec<T>,
    pub validation: Vec<T>,
    pub test: Vec<T>,
    pub seed: u64,
}

impl<T> DatasetSplit<T> {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.validation.len(), self.test.len())
    }
}

/// Shuffle deterministically under `seed` and partition by `ratios`
/// (train, validation, test).
///
/// Validation and test sizes are the ratios scaled by n and rounded to the
/// nearest integer; train receives the remainder. At n=10615 with ratios
/// (0.90, 0.05, 0.05) this reproduces the (9553, 531, 531) partition
/// exactly. Each part must come out non-empty.
pub fn split<T>(
    examples: Vec<T>,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit<T>, CorpusError> {
    let (r_train, r_val, r_test) = ratios;
    if examples.is_empty() {
        return Err(CorpusError::EmptyInput);
    }
    let sum = r_train + r_val + r_test;
    if (sum - 1.0).abs() > 1e-9 || r_train < 0.0 || r_val < 0.0 || r_test < 0.0 {
        return Err(CorpusError::BadRatios(ratios));
    }
    let n = examples.len();
    let n_val = (n as f64 * r_val).round() as usize;
    let n_test = (n as f64 * r_test).round() as usize;
    let n_train = n
        .checked_sub(n_val + n_test)
        .ok_or(CorpusError::EmptyPart {
            part: "train",
            ratios,
            n,
        })?;
    for (part, size) in [("train", n_train), ("validation", n_val), ("test", n_test)] {
        if size == 0 {
            return Err(CorpusError::EmptyPart { part, ratios, n });
        }
    }

    let mut items = examples;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    items.shuffle(&mut rng);
    let test = items.split_off(n_train + n_val);
    let validation = items.split_off(n_train);
    Ok(DatasetSplit {
        train: items,
        validation,
        test,
        seed,
    })
}
