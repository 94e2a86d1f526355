//! Split words into greedy longest-prefix subword pieces and encode a
//! sentence as fixed-length model input.

use std::path::Path;

use anyhow::Result;
use ulasan::tokenizer::{encode, load_vocab, wordpiece_tokenize};

fn main() -> Result<()> {
    let vocab = load_vocab(&Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/vocab_demo.txt"))?;
    println!("vocabulary: {} tokens", vocab.len());

    // In-vocab words stay whole; unknown suffixes fall to ## pieces; words
    // with no decomposition at all become [UNK].
    for word in ["bagus", "pengiriman", "kiriman", "bagusnya", "mantap"] {
        println!("  {word:<12} -> {}", wordpiece_tokenize(word, &vocab).join(" "));
    }

    let text = "pengiriman cepat dan harga murah";
    let input = encode(text, &vocab, 12)?;
    println!("\nencode {text:?} at max_len 12:");
    let tokens: Vec<&str> = input
        .ids
        .iter()
        .map(|&id| vocab.token(id).expect("ids come from this vocab"))
        .collect();
    println!("  tokens: {}", tokens.join(" "));
    println!("  ids:    {:?}", input.ids);
    println!("  mask:   {:?}", input.attention_mask);
    println!("  {} of {} positions carry content", input.content_len(), input.len());
    Ok(())
}
