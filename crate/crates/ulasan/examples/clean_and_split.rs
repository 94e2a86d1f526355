//! Clean review text (lowercase, strip digits and app keywords) and cut a
//! deterministic train/validation/test split.

use std::path::Path;

use anyhow::Result;
use ulasan::corpus::{dedup_by_id, load_reviews, load_token_list, preprocess, split, ReviewFormat};

fn main() -> Result<()> {
    let assets = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets");
    let keywords = load_token_list(&assets.join("app_keywords.txt"))?;
    let records = dedup_by_id(load_reviews(&assets.join("sample_reviews.csv"), ReviewFormat::Csv)?.records);

    println!("cleaning (keywords: {}):", keywords.join(", "));
    for record in records.iter().filter(|r| {
        let lowered = r.content.to_lowercase();
        keywords.iter().any(|k| lowered.contains(k.as_str()))
    }) {
        println!("  raw:     {}", record.content);
        println!("  cleaned: {}", preprocess(&record.content, &keywords));
    }

    // The split shuffles under the seed, then cuts by rounded fractions;
    // the same seed always reproduces the same parts.
    let parts = split(records, (0.90, 0.05, 0.05), 42)?;
    println!(
        "\nsplit {} reviews -> {} train / {} validation / {} test (seed {})",
        parts.train.len() + parts.validation.len() + parts.test.len(),
        parts.train.len(),
        parts.validation.len(),
        parts.test.len(),
        parts.seed
    );
    println!(
        "validation ids: {}",
        parts
            .validation
            .iter()
            .map(|r| r.review_id.as_str())
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(())
}
