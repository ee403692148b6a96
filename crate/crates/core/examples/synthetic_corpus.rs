//! Writes a seeded synthetic corpus as canonical JSONL, ready for the CLI.
//!
//!     cargo run --example synthetic_corpus -- <out-dir> [seed]
//!
//! Produces `corpus.jsonl` (train and val samples), `test.jsonl` and
//! `vocab.txt`.

use std::path::PathBuf;

use adetag::corpus::{write_corpus, Split};
use adetag::synthetic::{generate, SyntheticConfig};
use adetag::tokenizer::corpus_vocab;

fn main() -> adetag::Result<()> {
    let mut args = std::env::args().skip(1);
    let dir = PathBuf::from(args.next().unwrap_or_else(|| "synthetic".into()));
    let seed = args.next().map_or(0, |s| s.parse().expect("seed must be an integer"));
    std::fs::create_dir_all(&dir).map_err(|e| adetag::Error::Io {
        path: dir.clone(),
        source: e,
    })?;

    let corpus = generate(&SyntheticConfig {
        train: 400,
        val: 100,
        test: 100,
        seed,
        ..Default::default()
    });
    let train_val = corpus.subset(Split::Train).concat(&corpus.subset(Split::Val))?;
    let test = corpus.subset(Split::Test);
    write_corpus(&train_val, dir.join("corpus.jsonl"))?;
    write_corpus(&test, dir.join("test.jsonl"))?;
    corpus_vocab(&train_val, false).save(&dir.join("vocab.txt"))?;

    println!(
        "{} train/val and {} test samples written to {}",
        train_val.len(),
        test.len(),
        dir.display()
    );
    Ok(())
}
