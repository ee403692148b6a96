//! Word splitting, IOB encoding, WordPiece and label propagation on one
//! sentence.
//!
//!     cargo run --example labeling

use adetag::corpus::CharSpan;
use adetag::labeling::{aggregate_labels, iob_to_spans, propagate_labels, spans_to_iob, split_words};
use adetag::tokenizer::{encode, wordpiece_tokenize, Vocabulary};

fn main() -> adetag::Result<()> {
    let text = "I had heightened anxiety levels, generaly feeling unwell.";
    let words = split_words(text);
    let labels = spans_to_iob(&words, &[CharSpan::new(6, 31)]);
    for (w, l) in words.iter().zip(labels.iter()) {
        println!("{:<10} {l:?}", w.text);
    }

    let vocab = Vocabulary::fixture(
        ["i", "had", "heigh", "anxiety", "levels", ",", "feeling", "unwell", "."],
        ["##ten", "##ed"],
    );
    println!("heightened -> {:?}", wordpiece_tokenize("heightened", &vocab));

    let encoded = encode("example", &words, &vocab, 128);
    let counts = encoded.pieces_per_word();
    let pieces = propagate_labels(&labels.labels, &counts)?;
    println!(
        "{} words -> {} pieces: {:?}",
        words.len(),
        pieces.labels.len(),
        pieces.labels
    );

    let back = aggregate_labels(&pieces.labels, &counts)?;
    for span in iob_to_spans(&words, &back.labels) {
        println!("span [{}, {}): {:?}", span.start, span.end, &text[span.start..span.end]);
    }
    Ok(())
}
