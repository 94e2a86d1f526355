//! Weak-label reviews by summing lexicon polarity over cleaned tokens and
//! compare the result against score-based labels.

use std::path::Path;

use anyhow::Result;
use ulasan::corpus::{dedup_by_id, load_reviews, load_token_list, preprocess, ReviewFormat};
use ulasan::labeling::{label_by_lexicon, label_by_score, lexicon_score, load_lexicon};

fn main() -> Result<()> {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let lexicon = load_lexicon(&assets.join("sample_lexicon.tsv"))?;
    let keywords = load_token_list(&assets.join("app_keywords.txt"))?;
    let records = dedup_by_id(load_reviews(&assets.join("sample_reviews.csv"), ReviewFormat::Csv)?.records);

    let mut agree = 0;
    println!("{:<6} {:>5} {:<9} {:<9} content", "id", "sum", "lexicon", "score");
    for record in &records {
        let cleaned = preprocess(&record.content, &keywords);
        let tokens: Vec<&str> = cleaned.split_whitespace().collect();
        let polarity = lexicon_score(&tokens, &lexicon);
        let by_lexicon = label_by_lexicon(&cleaned, &lexicon);
        let by_score = label_by_score(record.score)?;
        if by_lexicon == by_score {
            agree += 1;
        } else {
            println!(
                "{:<6} {:>5} {:<9} {:<9} {}",
                record.review_id,
                polarity,
                by_lexicon.as_str(),
                by_score.as_str(),
                cleaned
            );
        }
    }
    println!(
        "\nthe two labelings agree on {agree} of {} reviews; rows above disagree",
        records.len()
    );
    Ok(())
}
