//! Weak-label the bundled review sample by star score: 1-2 negative,
//! 3 neutral, 4-5 positive.

use std::path::Path;

use anyhow::Result;
use ulasan::corpus::{dedup_by_id, load_reviews, ReviewFormat};
use ulasan::labeling::{class_distribution, label_by_score, LabeledReview};

fn main() -> Result<()> {
    let raw = Path::new(env!("CARGO_MANIFEST_DIR")).join("assets/sample_reviews.csv");
    let loaded = load_reviews(&raw, ReviewFormat::Csv)?;
    println!(
        "loaded {} rows, {} rejected:",
        loaded.total_rows(),
        loaded.rejections.len()
    );
    for rejection in &loaded.rejections {
        println!("  {rejection}");
    }

    let records = dedup_by_id(loaded.records);
    let mut rows = Vec::with_capacity(records.len());
    for record in records {
        let label = label_by_score(record.score)?;
        rows.push(LabeledReview { record, label });
    }

    println!("\nfirst rows:");
    for row in rows.iter().take(6) {
        println!(
            "  {} score {} -> {:<8} {}",
            row.record.review_id,
            row.record.score,
            row.label.as_str(),
            row.record.content
        );
    }

    let labels: Vec<_> = rows.iter().map(|r| r.label).collect();
    let [neg, neu, pos] = class_distribution(&labels);
    println!("\ndistribution: {neg} negative / {neu} neutral / {pos} positive");
    Ok(())
}
