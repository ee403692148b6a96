//! Subword emission sources, the tagging pipeline and training.

mod artifact;
mod encoder;
mod grid;
mod optim;
mod pipeline;
mod provider;
mod store;
mod train;

pub use artifact::{load_model, save_model, ModelRecord, ProviderKind};
pub(crate) use encoder::log_softmax_rows;
pub use encoder::{EncoderParams, EncoderShape, ForwardCache, ToyEncoder};
pub use grid::{grid_search, multi_seed, multi_seed_with, GridOutcome, GridSpec, GridTrial};
pub use optim::Adam;
pub use pipeline::{argmax_rows, Extraction, Tagger};
pub use provider::{EmissionMode, EmissionProvider};
pub use store::{EmissionStore, ROW_NORMALIZATION_TOLERANCE};
pub use train::{
    emission_training_pairs, evaluate, train, train_crf_posthoc, CorpusScores, CrfTraining, Hyperparameters,
    MetricSummary, RunReport, SeedRun, SelectionMetric, TrainConfig,
};
