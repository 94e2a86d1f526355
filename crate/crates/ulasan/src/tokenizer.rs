//! WordPiece subword tokenization and fixed-length model input formatting.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

/// Classification-pooling token, always at position 0.
pub const CLS: &str = "[CLS]";
/// Sequence terminator.
pub const SEP: &str = "[SEP]";
/// Padding filler; masked out of attention.
pub const PAD: &str = "[PAD]";
/// Out-of-vocabulary fallback.
pub const UNK: &str = "[UNK]";

/// Hard ceiling on encoded sequence length.
pub const MAX_SEQUENCE_LEN: usize = 512;

/// Words longer than this many characters become [UNK] without a
/// subword search.
pub const MAX_WORD_CHARS: usize = 100;

#[derive(Debug, Error)]
pub enum TokenizerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("vocabulary is missing special token {0}")]
    MissingSpecial(&'static str),
    #[error("duplicate vocabulary token `{0}`")]
    DuplicateToken(String),
    #[error("max_len {0} outside [2,{MAX_SEQUENCE_LEN}]")]
    BadMaxLen(usize),
}

/// An ordered subword vocabulary; a token's id is its zero-based position.
#[derive(Debug, Clone)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
    pad_id: u32,
    unk_id: u32,
    cls_id: u32,
    sep_id: u32,
}

impl Vocab {
    /// Build a vocabulary from an ordered token list. All four special
    /// tokens must be present and entries must be unique.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Vocab, TokenizerError> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, token) in tokens.iter().enumerate() {
            if index.insert(token.clone(), i as u32).is_some() {
                return Err(TokenizerError::DuplicateToken(token.clone()));
            }
        }
        let special = |name: &'static str| {
            index
                .get(name)
                .copied()
                .ok_or(TokenizerError::MissingSpecial(name))
        };
        Ok(Vocab {
            pad_id: special(PAD)?,
            unk_id: special(UNK)?,
            cls_id: special(CLS)?,
            sep_id: special(SEP)?,
            tokens,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn pad_id(&self) -> u32 {
        self.pad_id
    }

    pub fn unk_id(&self) -> u32 {
        self.unk_id
    }

    pub fn cls_id(&self) -> u32 {
        self.cls_id
    }

    pub fn sep_id(&self) -> u32 {
        self.sep_id
    }
}

/// Load a vocabulary file: UTF-8, one token per line, id = line index.
/// This matches the layout of published BERT vocabularies, so externally
/// obtained files load unchanged.
pub fn load_vocab(path: &Path) -> Result<Vocab, TokenizerError> {
    let file = File::open(path).map_err(|e| TokenizerError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut tokens = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| TokenizerError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        tokens.push(line.trim_end_matches(['\r', '\n']).to_string());
    }
    Vocab::from_tokens(tokens)
}

/// Segment whitespace-delimited words into subword pieces by greedy
/// longest-prefix matching.
///
/// Each word is scanned left to right: the longest vocabulary entry
/// matching at the cursor is taken (pieces after the first carry the
/// `##` continuation prefix) and the cursor advances. If at any cursor
/// position no prefix matches, the entire word collapses to [UNK].
pub fn wordpiece_tokenize(text: &str, vocab: &Vocab) -> Vec<String> {
    let mut pieces = Vec::new();
    for word in text.split_whitespace() {
        tokenize_word(word, vocab, &mut pieces);
    }
    pieces
}

fn tokenize_word(word: &str, vocab: &Vocab, out: &mut Vec<String>) {
    if word.chars().count() > MAX_WORD_CHARS {
        out.push(UNK.to_string());
        return;
    }
    let mut word_pieces = Vec::new();
    // Byte offsets of every char boundary, including the end of the word.
    let boundaries: Vec<usize> = word
        .char_indices()
        .map(|(i, _)| i)
        .chain(std::iter::once(word.len()))
        .collect();
    let mut start_idx = 0;
    while start_idx < boundaries.len() - 1 {
        let start = boundaries[start_idx];
        let mut matched = None;
        for end_idx in (start_idx + 1..boundaries.len()).rev() {
            let end = boundaries[end_idx];
            let candidate = if start == 0 {
                word[start..end].to_string()
            } else {
                format!("##{}", &word[start..end])
            };
            if vocab.contains(&candidate) {
                matched = Some((candidate, end_idx));
                break;
            }
        }
        match matched {
            Some((piece, end_idx)) => {
                word_pieces.push(piece);
                start_idx = end_idx;
            }
            None => {
                out.push(UNK.to_string());
                return;
            }
        }
    }
    out.append(&mut word_pieces);
}

/// A fixed-length model input: token ids, a 0/1 attention mask (1 marks a
/// real token, 0 marks padding), and all-zero segment ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedInput {
    pub ids: Vec<u32>,
    pub attention_mask: Vec<u8>,
    pub segment_ids: Vec<u8>,
}

impl EncodedInput {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Number of non-pad positions.
    pub fn content_len(&self) -> usize {
        self.attention_mask.iter().filter(|&&m| m == 1).count()
    }
}

/// Format text for the encoder: `[CLS] pieces… [SEP]` truncated to
/// `max_len` (pieces are cut, the specials always survive), then padded
/// with [PAD] up to `max_len`.
pub fn encode(text: &str, vocab: &Vocab, max_len: usize) -> Result<EncodedInput, TokenizerError> {
    if !(2..=MAX_SEQUENCE_LEN).contains(&max_len) {
        return Err(TokenizerError::BadMaxLen(max_len));
    }
    let pieces = wordpiece_tokenize(text, vocab);
    let keep = pieces.len().min(max_len - 2);
    let mut ids = Vec::with_capacity(max_len);
    ids.push(vocab.cls_id());
    for piece in &pieces[..keep] {
        ids.push(vocab.id(piece).unwrap_or_else(|| vocab.unk_id()));
    }
    ids.push(vocab.sep_id());
    let content = ids.len();
    ids.resize(max_len, vocab.pad_id());
    let mut attention_mask = vec![0u8; max_len];
    attention_mask[..content].fill(1);
    Ok(EncodedInput {
        ids,
        attention_mask,
        segment_ids: vec![0u8; max_len],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::io::Write;

    pub(crate) fn toy_vocab() -> Vocab {
        Vocab::from_tokens(
            [
                PAD, UNK, CLS, SEP, "main", "##nya", "bagus", "se", "##kali", "a", "##b",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        )
        .unwrap()
    }

    #[test]
    fn vocab_ids_are_line_indices() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for token in ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "bagus", "##nya", "se"] {
            writeln!(f, "{token}").unwrap();
        }
        let vocab = load_vocab(f.path()).unwrap();
        assert_eq!(vocab.len(), 7);
        assert_eq!(vocab.id("[PAD]"), Some(0));
        assert_eq!(vocab.id("bagus"), Some(4));
        assert_eq!(vocab.token(6), Some("se"));
    }

    #[test]
    fn vocab_missing_special_is_fatal() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for token in ["[PAD]", "[UNK]", "[SEP]", "bagus"] {
            writeln!(f, "{token}").unwrap();
        }
        assert!(matches!(
            load_vocab(f.path()),
            Err(TokenizerError::MissingSpecial(CLS))
        ));
    }

    #[test]
    fn vocab_duplicate_is_fatal() {
        let tokens = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "x", "x"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(matches!(
            Vocab::from_tokens(tokens),
            Err(TokenizerError::DuplicateToken(t)) if t == "x"
        ));
    }

    #[test]
    fn greedy_longest_match() {
        let vocab = toy_vocab();
        assert_eq!(
            wordpiece_tokenize("mainnya bagus", &vocab),
            vec!["main", "##nya", "bagus"]
        );
        assert_eq!(wordpiece_tokenize("sekali", &vocab), vec!["se", "##kali"]);
    }

    #[test]
    fn oov_word_collapses_to_unk() {
        let vocab = toy_vocab();
        assert_eq!(wordpiece_tokenize("zzz", &vocab), vec![UNK]);
        // "mainz": "main" matches but "##z" has no vocab entry.
        assert_eq!(wordpiece_tokenize("mainz", &vocab), vec![UNK]);
    }

    #[test]
    fn in_vocab_word_is_single_piece() {
        let vocab = toy_vocab();
        assert_eq!(wordpiece_tokenize("bagus", &vocab), vec!["bagus"]);
    }

    #[test]
    fn overlong_word_is_unk() {
        let vocab = toy_vocab();
        let long = "a".repeat(MAX_WORD_CHARS + 1);
        assert_eq!(wordpiece_tokenize(&long, &vocab), vec![UNK]);
    }

    #[test]
    fn multibyte_words_tokenize_on_char_boundaries() {
        let vocab = Vocab::from_tokens(
            [PAD, UNK, CLS, SEP, "é", "##é"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
        )
        .unwrap();
        assert_eq!(wordpiece_tokenize("ééé", &vocab), vec!["é", "##é", "##é"]);
    }

    #[test]
    fn encode_pads_and_masks() {
        let vocab = toy_vocab();
        let enc = encode("bagus", &vocab, 6).unwrap();
        let id = |t: &str| vocab.id(t).unwrap();
        assert_eq!(
            enc.ids,
            vec![
                id(CLS),
                id("bagus"),
                id(SEP),
                id(PAD),
                id(PAD),
                id(PAD)
            ]
        );
        assert_eq!(enc.attention_mask, vec![1, 1, 1, 0, 0, 0]);
        assert_eq!(enc.segment_ids, vec![0; 6]);
    }

    #[test]
    fn encode_truncates_to_max_len() {
        let vocab = toy_vocab();
        // 600 single-piece words.
        let text = vec!["bagus"; 600].join(" ");
        let enc = encode(&text, &vocab, 512).unwrap();
        assert_eq!(enc.len(), 512);
        assert_eq!(enc.ids[0], vocab.cls_id());
        assert_eq!(enc.ids[511], vocab.sep_id());
        assert!(enc.attention_mask.iter().all(|&m| m == 1));
    }

    #[test]
    fn encode_empty_text() {
        let vocab = toy_vocab();
        let enc = encode("", &vocab, 4).unwrap();
        assert_eq!(
            enc.ids,
            vec![vocab.cls_id(), vocab.sep_id(), vocab.pad_id(), vocab.pad_id()]
        );
        assert_eq!(enc.attention_mask, vec![1, 1, 0, 0]);
    }

    #[test]
    fn encode_rejects_bad_max_len() {
        let vocab = toy_vocab();
        assert!(matches!(encode("x", &vocab, 1), Err(TokenizerError::BadMaxLen(1))));
        assert!(matches!(
            encode("x", &vocab, 513),
            Err(TokenizerError::BadMaxLen(513))
        ));
    }

    proptest! {
        #[test]
        fn mask_total_follows_piece_count(
            words in proptest::collection::vec("(main|mainnya|bagus|sekali|zzz|a|ab)", 0..40),
            max_len in 2usize..64,
        ) {
            let vocab = toy_vocab();
            let text = words.join(" ");
            let pieces = wordpiece_tokenize(&text, &vocab);
            let enc = encode(&text, &vocab, max_len).unwrap();
            let mask_total: usize = enc.attention_mask.iter().map(|&m| m as usize).sum();
            prop_assert_eq!(mask_total, 2 + pieces.len().min(max_len - 2));
            prop_assert_eq!(enc.ids.len(), max_len);
            prop_assert_eq!(enc.attention_mask.len(), max_len);
            prop_assert_eq!(enc.ids[0], vocab.cls_id());
            // mask is 1 exactly at non-pad positions
            for (id, m) in enc.ids.iter().zip(&enc.attention_mask) {
                prop_assert_eq!(*m == 1, *id != vocab.pad_id());
            }
        }

        #[test]
        fn joining_pieces_reproduces_in_vocab_words(
            word in "(main|mainnya|sekali|bagus|ab|a)",
        ) {
            let vocab = toy_vocab();
            let pieces = wordpiece_tokenize(&word, &vocab);
            let joined: String = pieces
                .iter()
                .map(|p| p.strip_prefix("##").unwrap_or(p))
                .collect();
            prop_assert_eq!(joined, word);
        }
    }

    #[test]
    fn encode_is_stateless() {
        let vocab = toy_vocab();
        let a = encode("mainnya bagus", &vocab, 8).unwrap();
        let _ = encode("zzz zzz zzz", &vocab, 8).unwrap();
        let b = encode("mainnya bagus", &vocab, 8).unwrap();
        assert_eq!(a, b);
    }
}
