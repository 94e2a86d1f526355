//! Deterministic synthetic review generator for demos and sanity runs.
//!
//! Sentences are built from small Indonesian word pools so that the lexicon
//! label is separable by construction: positive sentences carry strictly
//! more positive than negative lexicon words, and vice versa. Scores are
//! generated to agree with the sentiment, so score-based and lexicon-based
//! labeling coincide on this data.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ReviewRecord;
use crate::labeling::{Lexicon, Sentiment};
use crate::tokenizer::{CLS, PAD, SEP, UNK};

pub const POSITIVE_WORDS: [&str; 12] = [
    "bagus",
    "mantap",
    "bermanfaat",
    "puas",
    "suka",
    "keren",
    "membantu",
    "cepat",
    "mudah",
    "praktis",
    "lancar",
    "nyaman",
];

pub const NEGATIVE_WORDS: [&str; 12] = [
    "jelek",
    "lambat",
    "error",
    "buruk",
    "kecewa",
    "gagal",
    "lemot",
    "parah",
    "macet",
    "susah",
    "berat",
    "rusak",
];

pub const FILLER_WORDS: [&str; 14] = [
    "aplikasi",
    "ini",
    "saya",
    "untuk",
    "dengan",
    "yang",
    "fitur",
    "versi",
    "update",
    "akun",
    "barang",
    "pengiriman",
    "harga",
    "promo",
];

/// A generated corpus: labeled reviews, the lexicon that separates them,
/// and a whole-word vocabulary covering every generated token.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub reviews: Vec<ReviewRecord>,
    pub labels: Vec<Sentiment>,
    pub lexicon: Lexicon,
    pub vocab_tokens: Vec<String>,
}

/// Lexicon assigning +1 to every positive pool word and -1 to every
/// negative pool word.
pub fn pool_lexicon() -> Lexicon {
    let entries = POSITIVE_WORDS
        .iter()
        .map(|w| (w.to_string(), 1i64))
        .chain(NEGATIVE_WORDS.iter().map(|w| (w.to_string(), -1i64)));
    Lexicon::from_entries(entries).expect("pool words are distinct")
}

/// Vocabulary token list covering the specials plus every pool word, so
/// generated sentences encode without [UNK].
pub fn pool_vocab_tokens() -> Vec<String> {
    let mut tokens: Vec<String> = [PAD, UNK, CLS, SEP].iter().map(|s| s.to_string()).collect();
    tokens.extend(
        POSITIVE_WORDS
            .iter()
            .chain(NEGATIVE_WORDS.iter())
            .chain(FILLER_WORDS.iter())
            .map(|s| s.to_string()),
    );
    tokens
}

fn sentence(rng: &mut ChaCha8Rng, sentiment: Sentiment) -> String {
    let mut tokens: Vec<&str> = Vec::new();
    let n_filler = rng.gen_range(2..=5);
    for _ in 0..n_filler {
        tokens.push(FILLER_WORDS[rng.gen_range(0..FILLER_WORDS.len())]);
    }
    let (majority, minority): (&[&str], &[&str]) = match sentiment {
        Sentiment::Positive => (&POSITIVE_WORDS, &NEGATIVE_WORDS),
        Sentiment::Negative => (&NEGATIVE_WORDS, &POSITIVE_WORDS),
        Sentiment::Neutral => (&[], &[]),
    };
    if sentiment == Sentiment::Neutral {
        // Either no sentiment words at all, or an exactly balanced pair.
        if rng.gen_bool(0.5) {
            tokens.push(POSITIVE_WORDS[rng.gen_range(0..POSITIVE_WORDS.len())]);
            tokens.push(NEGATIVE_WORDS[rng.gen_range(0..NEGATIVE_WORDS.len())]);
        }
    } else {
        let n_major = rng.gen_range(2..=4);
        for _ in 0..n_major {
            tokens.push(majority[rng.gen_range(0..majority.len())]);
        }
        if rng.gen_bool(0.3) {
            tokens.push(minority[rng.gen_range(0..minority.len())]);
        }
    }
    tokens.shuffle(rng);
    tokens.join(" ")
}

fn score_for(rng: &mut ChaCha8Rng, sentiment: Sentiment) -> u8 {
    match sentiment {
        Sentiment::Negative => rng.gen_range(1..=2),
        Sentiment::Neutral => 3,
        Sentiment::Positive => rng.gen_range(4..=5),
    }
}

/// Generate `n` reviews cycling through the three classes, deterministic
/// under `seed`.
pub fn generate(n: usize, seed: u64) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reviews = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let sentiment = Sentiment::ALL[i % 3];
        let content = sentence(&mut rng, sentiment);
        reviews.push(ReviewRecord {
            review_id: format!("syn-{i:05}"),
            username: format!("user{:03}", rng.gen_range(0..1000)),
            user_image: String::new(),
            content,
            score: score_for(&mut rng, sentiment),
            review_date: format!("2020-{:02}-{:02}", rng.gen_range(1..=12), rng.gen_range(1..=28)),
        });
        labels.push(sentiment);
    }
    SyntheticData {
        reviews,
        labels,
        lexicon: pool_lexicon(),
        vocab_tokens: pool_vocab_tokens(),
    }
}
