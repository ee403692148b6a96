//! Grid search over learning rate and dropout, then the multi-seed protocol
//! for the winning configuration.
//!
//!     cargo run --release --example grid_search

use adetag::corpus::Split;
use adetag::synthetic::{generate, SyntheticConfig};
use adetag::tagger::{grid_search, multi_seed, GridSpec, RunReport, SelectionMetric, TrainConfig};
use adetag::tokenizer::corpus_vocab;

fn main() -> adetag::Result<()> {
    let corpus = generate(&SyntheticConfig {
        train: 200,
        val: 60,
        test: 80,
        seed: 2,
        ..Default::default()
    });
    let train_split = corpus.subset(Split::Train);
    let val = corpus.subset(Split::Val);
    let test = corpus.subset(Split::Test);
    let train_val = train_split.concat(&val)?;
    let vocab = corpus_vocab(&train_val, false);

    let spec = GridSpec {
        learning_rates: vec![5e-3, 1e-3],
        dropouts: vec![0.1, 0.2],
        selection: SelectionMetric::PartialF1,
    };
    let base = TrainConfig {
        epochs: 10,
        ..Default::default()
    };
    let outcome = grid_search(&train_split, &val, &vocab, &spec, &base)?;
    for (i, t) in outcome.trials.iter().enumerate() {
        let mark = if i == outcome.best_index { "*" } else { " " };
        println!(
            "{mark} lr {:<6} dropout {:.2}  epoch {:>2}  val partial F1 {:.3}",
            t.learning_rate, t.dropout, t.best_epoch, t.score
        );
    }

    let report = multi_seed(&outcome.best, &[1, 2, 3], &train_val, &test, &vocab)?;
    print!("{}", RunReport::f1_table(&[("toy+CRF", &report)]));
    Ok(())
}
