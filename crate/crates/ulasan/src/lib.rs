//! Sentiment-analysis toolkit for Indonesian mobile-app reviews.
//!
//! `ulasan` (Indonesian for "review") covers a full desk-scale pipeline:
//!
//! - [`corpus`] — load, clean, and split review datasets
//! - [`labeling`] — weak labels from star scores or a sentiment lexicon
//! - [`tokenizer`] — WordPiece subwords and fixed-length model inputs
//! - [`baselines`] — TF-IDF features, five classical classifiers, k-fold CV
//! - [`encoder`] — a compact transformer encoder with exact backprop
//! - [`trainer`] — Adam fine-tuning, checkpointing, hyperparameter grids
//! - [`eval`] — accuracy, confusion matrices, tabular run reports
//!
//! The `examples/` directory is the best starting point: each example is a
//! runnable walkthrough of one capability. A thin `ulasan` binary wires the
//! same functions into a subcommand CLI (see [`cli`]).

pub mod baselines;
pub mod cli;
pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod labeling;
pub mod synthetic;
pub mod tokenizer;
pub mod trainer;

pub use corpus::{DatasetSplit, ReviewRecord};
pub use encoder::{EncoderConfig, EncoderParams};
pub use labeling::{Lexicon, Sentiment};
pub use tokenizer::{EncodedInput, Vocab};
