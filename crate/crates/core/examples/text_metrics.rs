//! Readability and length statistics of extracted mention strings.
//!
//!     cargo run --example text_metrics -- "stomach cramps" "rash" ...

use adetag::eval::{prediction_text_stats, TextMetrics};

fn main() -> adetag::Result<()> {
    let mut mentions: Vec<String> = std::env::args().skip(1).collect();
    if mentions.is_empty() {
        mentions = ["severe headache", "rash", "could not sleep for days", "muscle pain"]
            .map(String::from)
            .to_vec();
    }
    let metrics = TextMetrics::bundled();
    for m in &mentions {
        if let Some(s) = metrics.readability(m)? {
            println!(
                "{m:<28} Flesch {:>7.2}  ARI {:>6.2}  Dale-Chall {:>5.2}  syllables {}",
                s.flesch, s.ari, s.dale_chall, s.syllable_count
            );
        }
    }
    if let Some(summary) = prediction_text_stats(&mentions, &metrics)? {
        println!("\nover {} mentions:", summary.count);
        for (name, v) in summary.rows() {
            println!("  {name:<24} {:.2} ± {:.2}", v.mean, v.std);
        }
    }
    Ok(())
}
