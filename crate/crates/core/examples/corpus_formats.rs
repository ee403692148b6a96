//! Reads the same two documents from standoff and TSV sources, then writes
//! canonical JSONL and splits it.
//!
//!     cargo run --example corpus_formats

use std::fs;

use adetag::corpus::{load_corpus, split_corpus, write_corpus, CorpusFormat};

fn main() -> adetag::Result<()> {
    let dir = std::env::temp_dir().join("adetag-corpus-formats");
    let docs = dir.join("standoff");
    fs::create_dir_all(&docs).map_err(|e| adetag::Error::Io {
        path: docs.clone(),
        source: e,
    })?;
    let write = |name: &str, body: &str| fs::write(docs.join(name), body).expect("temp dir is writable");
    write("d1.txt", "Severe headache after the second dose.");
    write("d1.ann", "T1\tADR 0 15\tSevere headache\n");
    write("d2.txt", "No problems so far.");

    let tsv = dir.join("mentions.tsv");
    fs::write(
        &tsv,
        "id\tbegin\tend\ttype\textraction\ttext\n\
         d1\t0\t15\tADR\tSevere headache\tSevere headache after the second dose.\n\
         d2\t\t\t\t\tNo problems so far.\n",
    )
    .map_err(|e| adetag::Error::Io {
        path: tsv.clone(),
        source: e,
    })?;

    let from_standoff = load_corpus(&docs, CorpusFormat::Standoff)?;
    let from_tsv = load_corpus(&tsv, CorpusFormat::Tsv)?;
    for (a, b) in from_standoff.samples().iter().zip(from_tsv.samples()) {
        assert_eq!((a.id.as_str(), a.spans()), (b.id.as_str(), b.spans()));
        let mentions: Vec<&str> = a.spans().iter().map(|&s| a.surface(s)).collect();
        println!("{}: {:?}", a.id, mentions);
    }

    let out = dir.join("corpus.jsonl");
    write_corpus(&from_standoff, &out)?;
    println!("wrote {}", out.display());

    let (train, val) = split_corpus(&from_standoff, 0.5, 0, false)?;
    println!("split: {} train, {} val", train.len(), val.len());
    Ok(())
}
