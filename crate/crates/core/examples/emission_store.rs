//! Decoding from precomputed emissions: builds a store like an external
//! encoder would, fits a CRF on it and compares decoding with and without the
//! CRF.
//!
//!     cargo run --release --example emission_store

use adetag::corpus::Split;
use adetag::synthetic::{fixture_emissions, generate, FixtureNoise, SyntheticConfig};
use adetag::tagger::{
    emission_training_pairs, evaluate, train_crf_posthoc, EmissionProvider, EmissionStore, Tagger, TrainConfig,
};
use adetag::tokenizer::{corpus_vocab, DEFAULT_MAX_LEN};

fn main() -> adetag::Result<()> {
    let corpus = generate(&SyntheticConfig::default());
    let vocab = corpus_vocab(&corpus, false);

    // noisy rows whose interior pieces lean towards O
    let store = fixture_emissions(&corpus, &vocab, DEFAULT_MAX_LEN, &FixtureNoise::orphan_inside(), 0)?;
    let path = std::env::temp_dir().join("adetag-emissions.bin");
    store.write(&path)?;
    let store = EmissionStore::read(&path)?;
    println!("{} matrices in {}", store.len(), path.display());

    let provider = EmissionProvider::FileBacked(store);
    let pairs = emission_training_pairs(&corpus.subset(Split::Train), &vocab, &provider, DEFAULT_MAX_LEN)?;
    let crf = train_crf_posthoc(
        &pairs,
        &TrainConfig {
            epochs: 20,
            learning_rate: 0.05,
            ..Default::default()
        },
    )?;
    println!("B→I {:.2}  O→I {:.2}", crf.transitions[[1, 2]], crf.transitions[[0, 2]]);

    let test = corpus.subset(Split::Test);
    let mut tagger = Tagger {
        vocab,
        provider,
        crf: Some(crf),
        max_len: DEFAULT_MAX_LEN,
    };
    let with_crf = evaluate(&tagger, &test, 1)?;
    tagger.crf = None;
    let argmax = evaluate(&tagger, &test, 1)?;
    println!(
        "strict F1: CRF {:.3}, arg-max {:.3}",
        with_crf.strict.f1, argmax.strict.f1
    );
    Ok(())
}
