pub mod cli;
pub mod corpus;
pub mod crf;
pub mod error;
pub mod eval;
pub mod labeling;
pub mod synthetic;
pub mod tagger;
pub mod tokenizer;

pub use error::{Error, Result};
