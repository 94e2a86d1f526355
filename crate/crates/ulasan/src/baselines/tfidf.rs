//! Smoothed TF-IDF features over whitespace-tokenized documents.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BaselinesError;

/// A sorted sparse vector of feature values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseVec {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseVec {
    pub fn empty() -> SparseVec {
        SparseVec {
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Largest feature index present, if any.
    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    pub fn dot(&self, other: &SparseVec) -> f64 {
        let mut sum = 0.0;
        let mut i = 0;
        let mut j = 0;
        while i < self.indices.len() && j < other.indices.len() {
            match self.indices[i].cmp(&other.indices[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    sum += self.values[i] * other.values[j];
                    i += 1;
                    j += 1;
                }
            }
        }
        sum
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }

    pub fn to_dense(&self, n_features: usize) -> Vec<f64> {
        let mut dense = vec![0.0; n_features];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            dense[i] = v;
        }
        dense
    }
}

/// A fitted TF-IDF vocabulary: term → column plus per-term idf weights.
///
/// idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1, so a term present in every
/// document still scores 1. Rows are L2-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpace {
    vocabulary: BTreeMap<String, usize>,
    idf: Vec<f64>,
    n_docs: usize,
}

impl FeatureSpace {
    /// Fit on tokenized documents. Columns are assigned in lexicographic
    /// term order, so fitting is independent of document order.
    pub fn fit(documents: &[Vec<String>]) -> Result<FeatureSpace, BaselinesError> {
        if documents.is_empty() {
            return Err(BaselinesError::EmptyCorpus);
        }
        let mut df: BTreeMap<&str, usize> = BTreeMap::new();
        for doc in documents {
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for term in seen {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        if df.is_empty() {
            return Err(BaselinesError::EmptyCorpus);
        }
        let n_docs = documents.len();
        let mut vocabulary = BTreeMap::new();
        let mut idf = Vec::with_capacity(df.len());
        for (col, (term, count)) in df.into_iter().enumerate() {
            vocabulary.insert(term.to_string(), col);
            idf.push(((1 + n_docs) as f64 / (1 + count) as f64).ln() + 1.0);
        }
        Ok(FeatureSpace {
            vocabulary,
            idf,
            n_docs,
        })
    }

    pub fn n_features(&self) -> usize {
        self.idf.len()
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn column(&self, term: &str) -> Option<usize> {
        self.vocabulary.get(term).copied()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.column(term).map(|c| self.idf[c])
    }

    /// Map a tokenized document to its L2-normalized tf·idf row. Terms
    /// outside the fitted vocabulary are ignored; a document with no known
    /// terms becomes the zero vector.
    pub fn transform(&self, document: &[String]) -> SparseVec {
        let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
        for term in document {
            if let Some(col) = self.column(term) {
                *counts.entry(col).or_insert(0.0) += 1.0;
            }
        }
        let mut vec = SparseVec {
            indices: counts.keys().copied().collect(),
            values: counts
                .iter()
                .map(|(&col, &tf)| tf * self.idf[col])
                .collect(),
        };
        let norm = vec.norm();
        if norm > 0.0 {
            vec.scale(1.0 / norm);
        }
        vec
    }

    pub fn transform_all(&self, documents: &[Vec<String>]) -> Vec<SparseVec> {
        documents.iter().map(|d| self.transform(d)).collect()
    }
}

/// Fit a feature space and transform the fitting corpus in one call.
pub fn tfidf_fit_transform(
    documents: &[Vec<String>],
) -> Result<(FeatureSpace, Vec<SparseVec>), BaselinesError> {
    let space = FeatureSpace::fit(documents)?;
    let rows = space.transform_all(documents);
    Ok((space, rows))
}

/// Split whitespace-delimited text into owned tokens.
pub fn tokenize_document(text: &str) -> Vec<String> {
    text.split_whitespace().map(str::to_string).collect()
}
