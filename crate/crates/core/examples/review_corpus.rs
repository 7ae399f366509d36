//! Writes a synthetic two-class review corpus and its schema.
//!
//! ```text
//! cargo run -p gibbsgen-core --example review_corpus -- data 2400 7
//! ```

#[path = "../tests/common/mod.rs"]
mod common;

use std::path::PathBuf;

fn main() -> std::io::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "data".into()));
    let count = args.next().map_or(2400, |a| a.parse().expect("sentence count"));
    let seed = args.next().map_or(7, |a| a.parse().expect("seed"));

    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join("schema.txt"), common::sentiment_schema().to_text())?;
    let names = ["negative", "positive"];
    let text: String = common::sentiment_sentences(count, seed)
        .into_iter()
        .map(|(label, s)| format!("{}\t{s}\n", names[label]))
        .collect();
    std::fs::write(dir.join("reviews.tsv"), text)?;
    println!("wrote {count} sentences to {}", dir.join("reviews.tsv").display());
    Ok(())
}
