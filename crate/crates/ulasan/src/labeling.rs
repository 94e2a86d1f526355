//! Weak sentiment labeling: from 1–5 review scores or from a signed
//! word-weight lexicon.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::ReviewRecord;

#[derive(Debug, Error)]
pub enum LabelingError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("score {0} outside [1,5]")]
    ScoreOutOfRange(u8),
    #[error("lexicon line {line}: {message}")]
    MalformedLexicon { line: usize, message: String },
    #[error("duplicate lexicon word `{0}`")]
    DuplicateWord(String),
    #[error("lexicon word `{0}` has zero weight")]
    ZeroWeight(String),
    #[error("unknown sentiment label `{0}`")]
    UnknownLabel(String),
    #[error("labeled csv {path} is missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("csv error in {path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("labeled csv {path} row {row}: {message}")]
    BadRow {
        path: String,
        row: usize,
        message: String,
    },
}

/// The three sentiment classes with their fixed training encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sentiment {
    Negative,
    Neutral,
    Positive,
}

impl Sentiment {
    pub const ALL: [Sentiment; 3] = [Sentiment::Negative, Sentiment::Neutral, Sentiment::Positive];
    pub const N_CLASSES: usize = 3;

    /// Integer encoding used for training: negative 0, neutral 1, positive 2.
    pub fn index(self) -> usize {
        match self {
            Sentiment::Negative => 0,
            Sentiment::Neutral => 1,
            Sentiment::Positive => 2,
        }
    }

    pub fn from_index(i: usize) -> Option<Sentiment> {
        Sentiment::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Sentiment::Negative => "negative",
            Sentiment::Neutral => "neutral",
            Sentiment::Positive => "positive",
        }
    }

    pub fn parse(s: &str) -> Result<Sentiment, LabelingError> {
        match s {
            "negative" => Ok(Sentiment::Negative),
            "neutral" => Ok(Sentiment::Neutral),
            "positive" => Ok(Sentiment::Positive),
            other => Err(LabelingError::UnknownLabel(other.to_string())),
        }
    }
}

impl fmt::Display for Sentiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Map a 1–5 review score to a sentiment: 1,2 negative; 3 neutral;
/// 4,5 positive.
pub fn label_by_score(score: u8) -> Result<Sentiment, LabelingError> {
    match score {
        1 | 2 => Ok(Sentiment::Negative),
        3 => Ok(Sentiment::Neutral),
        4 | 5 => Ok(Sentiment::Positive),
        other => Err(LabelingError::ScoreOutOfRange(other)),
    }
}

/// Word → signed integer weight map for lexicon labeling.
///
/// Matching is exact whole-word on lowercase tokens; weights are nonzero
/// and their sign defines polarity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    entries: BTreeMap<String, i64>,
    positive_count: usize,
    negative_count: usize,
}

impl Lexicon {
    /// Build from (word, weight) pairs, enforcing uniqueness and nonzero
    /// weights.
    pub fn from_entries<I>(pairs: I) -> Result<Lexicon, LabelingError>
    where
        I: IntoIterator<Item = (String, i64)>,
    {
        let mut entries = BTreeMap::new();
        for (word, weight) in pairs {
            if weight == 0 {
                return Err(LabelingError::ZeroWeight(word));
            }
            if entries.insert(word.clone(), weight).is_some() {
                return Err(LabelingError::DuplicateWord(word));
            }
        }
        let positive_count = entries.values().filter(|w| **w > 0).count();
        let negative_count = entries.len() - positive_count;
        Ok(Lexicon {
            entries,
            positive_count,
            negative_count,
        })
    }

    pub fn weight(&self, word: &str) -> i64 {
        self.entries.get(word).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn positive_count(&self) -> usize {
        self.positive_count
    }

    pub fn negative_count(&self) -> usize {
        self.negative_count
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, i64)> {
        self.entries.iter().map(|(w, &weight)| (w.as_str(), weight))
    }

    /// Merge another lexicon into this one (e.g. separate positive and
    /// negative files). Duplicate words are fatal.
    pub fn merge(self, other: Lexicon) -> Result<Lexicon, LabelingError> {
        Lexicon::from_entries(
            self.entries
                .into_iter()
                .chain(other.entries),
        )
    }
}

/// Load a tab-separated `word<TAB>weight` lexicon file. A single header
/// line `word<TAB>weight` is permitted; blank lines are skipped.
pub fn load_lexicon(path: &Path) -> Result<Lexicon, LabelingError> {
    let file = File::open(path).map_err(|e| LabelingError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut pairs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| LabelingError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        let mut parts = trimmed.splitn(2, '\t');
        let word = parts.next().unwrap_or("").trim();
        let weight_text = parts.next().map(str::trim).ok_or_else(|| {
            LabelingError::MalformedLexicon {
                line: i + 1,
                message: "expected `word<TAB>weight`".to_string(),
            }
        })?;
        if i == 0 && word == "word" && weight_text == "weight" {
            continue;
        }
        let weight: i64 =
            weight_text
                .parse()
                .map_err(|_| LabelingError::MalformedLexicon {
                    line: i + 1,
                    message: format!("weight `{weight_text}` is not an integer"),
                })?;
        pairs.push((word.to_string(), weight));
    }
    Lexicon::from_entries(pairs)
}

/// Sum the lexicon weights of every token, counting repeats per occurrence.
/// Tokens absent from the lexicon contribute zero.
pub fn lexicon_score<S: AsRef<str>>(tokens: &[S], lexicon: &Lexicon) -> i64 {
    tokens.iter().map(|t| lexicon.weight(t.as_ref())).sum()
}

/// Label preprocessed text by the sign of its summed lexicon score:
/// positive sum → positive, negative sum → negative, zero → neutral.
pub fn label_by_lexicon(text: &str, lexicon: &Lexicon) -> Sentiment {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    match lexicon_score(&tokens, lexicon) {
        s if s > 0 => Sentiment::Positive,
        s if s < 0 => Sentiment::Negative,
        _ => Sentiment::Neutral,
    }
}

/// Count labels per class, indexed by the training encoding
/// (negative, neutral, positive).
pub fn class_distribution(labels: &[Sentiment]) -> [usize; 3] {
    let mut counts = [0usize; 3];
    for label in labels {
        counts[label.index()] += 1;
    }
    counts
}

/// A review paired with its weak label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledReview {
    pub record: ReviewRecord,
    pub label: Sentiment,
}

/// Column order of labeled CSV files: the canonical review columns plus a
/// trailing `label`.
pub const LABELED_CSV_HEADER: [&str; 7] = [
    "review_id",
    "username",
    "user_image",
    "content",
    "score",
    "review_date",
    "label",
];

/// Write labeled reviews as CSV (review columns plus `label`).
pub fn write_labeled_csv(rows: &[LabeledReview], path: &Path) -> Result<(), LabelingError> {
    let file = File::create(path).map_err(|e| LabelingError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut writer = csv::Writer::from_writer(file);
    let csv_err = |e: csv::Error| LabelingError::Csv {
        path: path.display().to_string(),
        source: e,
    };
    writer.write_record(LABELED_CSV_HEADER).map_err(csv_err)?;
    for row in rows {
        let r = &row.record;
        writer
            .write_record([
                r.review_id.as_str(),
                r.username.as_str(),
                r.user_image.as_str(),
                r.content.as_str(),
                &r.score.to_string(),
                r.review_date.as_str(),
                row.label.as_str(),
            ])
            .map_err(csv_err)?;
    }
    writer.flush().map_err(|e| LabelingError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Load a labeled CSV produced by [`write_labeled_csv`]. Malformed rows are
/// fatal here: labeled files are pipeline-internal artifacts.
pub fn load_labeled_csv(path: &Path) -> Result<Vec<LabeledReview>, LabelingError> {
    let file = File::open(path).map_err(|e| LabelingError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut reader = csv::Reader::from_reader(BufReader::new(file));
    let headers = reader
        .headers()
        .map_err(|e| LabelingError::Csv {
            path: path.display().to_string(),
            source: e,
        })?
        .clone();
    let col = |name: &str| -> Result<usize, LabelingError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LabelingError::MissingColumn {
                path: path.display().to_string(),
                column: name.to_string(),
            })
    };
    let cols: Vec<usize> = LABELED_CSV_HEADER
        .iter()
        .map(|name| col(name))
        .collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row.map_err(|e| LabelingError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let field = |c: usize| row.get(cols[c]).unwrap_or("").to_string();
        let bad_row = |message: String| LabelingError::BadRow {
            path: path.display().to_string(),
            row: i + 1,
            message,
        };
        let score: u8 = field(4)
            .trim()
            .parse()
            .map_err(|_| bad_row(format!("score `{}` is not an integer", field(4))))?;
        let label = Sentiment::parse(&field(6)).map_err(|e| bad_row(e.to_string()))?;
        rows.push(LabeledReview {
            record: ReviewRecord {
                review_id: field(0),
                username: field(1),
                user_image: field(2),
                content: field(3),
                score,
                review_date: field(5),
            },
            label,
        });
    }
    Ok(rows)
}
