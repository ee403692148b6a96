//! Trains the toy encoder with a CRF head on a synthetic corpus and reports
//! test scores.
//!
//!     cargo run --release --example train_synthetic -- [epochs] [learning_rate]

use std::time::Instant;

use adetag::corpus::Split;
use adetag::synthetic::{generate, SyntheticConfig};
use adetag::tagger::{evaluate, train, TrainConfig};
use adetag::tokenizer::corpus_vocab;

fn main() -> adetag::Result<()> {
    let mut args = std::env::args().skip(1);
    let epochs = args
        .next()
        .map_or(Ok(20), |a| a.parse())
        .expect("epochs must be an integer");
    let learning_rate = args
        .next()
        .map_or(Ok(5e-3), |a| a.parse())
        .expect("learning rate must be a number");

    let corpus = generate(&SyntheticConfig {
        val: 100,
        ..Default::default()
    });
    let vocab = corpus_vocab(&corpus, false);
    let config = TrainConfig {
        epochs,
        learning_rate,
        ..Default::default()
    };

    let started = Instant::now();
    let (tagger, report) = train(&corpus, &vocab, &config)?;
    let run = &report.runs[0];
    for (epoch, (loss, val)) in run.loss_curve.iter().zip(&run.validation_curve).enumerate() {
        println!("epoch {:>3}  loss {loss:>8.4}  val partial F1 {val:.3}", epoch + 1);
    }
    println!(
        "kept epoch {} after {:.1}s",
        run.best_epoch,
        started.elapsed().as_secs_f64()
    );

    let scores = evaluate(&tagger, &corpus.subset(Split::Test), 1)?;
    println!(
        "test strict F1 {:.3}  partial F1 {:.3}",
        scores.strict.f1, scores.partial.f1
    );
    Ok(())
}
