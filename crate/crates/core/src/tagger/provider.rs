use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::encoder::ToyEncoder;
use super::store::EmissionStore;
use crate::crf::EmissionMatrix;
use crate::error::{Error, Result};
use crate::tokenizer::TokenizedSample;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EmissionMode {
    Eval,
    /// Dropout on intermediate activations, masks drawn from `seed`.
    Train {
        dropout: f64,
        seed: u64,
    },
}

/// Source of per-subword label log-probabilities.
#[derive(Debug, Clone)]
#[allow(clippy::large_enum_variant)]
pub enum EmissionProvider {
    ToyEncoder(ToyEncoder),
    FileBacked(EmissionStore),
}

impl EmissionProvider {
    /// Log-softmax rows over the unmasked positions of `sample`.
    pub fn emissions(&self, sample: &TokenizedSample, mode: EmissionMode) -> Result<EmissionMatrix> {
        match self {
            EmissionProvider::ToyEncoder(encoder) => {
                let ids = sample.unmasked_ids();
                let log_probs = match mode {
                    EmissionMode::Eval => encoder.log_probs(ids)?,
                    EmissionMode::Train { dropout, seed } => {
                        let mut rng = ChaCha8Rng::seed_from_u64(seed);
                        encoder.forward(ids, Some((dropout, &mut rng)))?.log_probs
                    }
                };
                EmissionMatrix::new(log_probs)
            }
            EmissionProvider::FileBacked(store) => {
                let matrix: &Array2<f64> = store
                    .get(&sample.id)
                    .ok_or_else(|| Error::Lookup(format!("sample id {:?} not in emission store", sample.id)))?;
                if matrix.nrows() != sample.unmasked_len() {
                    return Err(Error::validation(
                        format!("emissions for {:?}", sample.id),
                        format!(
                            "{} rows stored, sample has {} unmasked positions",
                            matrix.nrows(),
                            sample.unmasked_len()
                        ),
                    ));
                }
                EmissionMatrix::new(matrix.clone())
            }
        }
    }

    pub fn as_encoder(&self) -> Option<&ToyEncoder> {
        match self {
            EmissionProvider::ToyEncoder(encoder) => Some(encoder),
            EmissionProvider::FileBacked(_) => None,
        }
    }
}
