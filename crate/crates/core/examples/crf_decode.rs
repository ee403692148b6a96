//! Scores, partition function, marginals and Viterbi decoding for a hand-built
//! emission matrix, with and without the O→I constraint.
//!
//!     cargo run --example crf_decode

use adetag::crf::{log_partition, posterior_marginals, viterbi_decode, CrfParams, EmissionMatrix};

fn main() -> adetag::Result<()> {
    // columns are O, B, I; the second row prefers an inside label with nothing open
    let e = EmissionMatrix::from_rows(&[[2.0, 0.1, 0.0], [0.0, 0.9, 1.0], [0.2, 0.0, 1.5], [1.0, 0.0, 0.0]])?;

    let free = CrfParams::zeros(false);
    let (path, score) = viterbi_decode(&e, &free);
    println!("unconstrained: {:?} score {score:.3}", path.labels);
    println!("log Z = {:.4}", log_partition(&e, &free));

    let constrained = CrfParams::zeros(true);
    let (path, score) = viterbi_decode(&e, &constrained);
    println!("constrained:   {:?} score {score:.3}", path.labels);

    println!("marginals (O B I):");
    for row in posterior_marginals(&e, &constrained).rows() {
        println!("  {:.3} {:.3} {:.3}", row[0], row[1], row[2]);
    }
    Ok(())
}
