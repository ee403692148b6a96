//! Command-line front end: argument parsing, configuration, manifests and
//! the per-command drivers.

mod commands;
mod config;
mod manifest;
mod tables;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use commands::{
    CompareRecord, EvaluationRecord, GridRecord, MatchCounts, MetricTest, SystemTextStats, TextAnalysisRecord,
    TrainRecord,
};
pub use config::{AnalysisSection, CorpusSection, ExperimentConfig, CONFIG_VERSION};
pub use manifest::{sidecar_path, InputDigest, RunManifest};

use crate::corpus::CorpusFormat;
use crate::error::Error;

#[derive(Debug, Parser)]
#[command(name = "adetag", version, about = "Adverse drug event span tagging toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub common: CommonArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Experiment configuration (TOML); flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads; results are identical for any value.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file or directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Repeat for more log output.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert a standoff, TSV or JSONL corpus to canonical JSONL.
    Convert(ConvertArgs),
    /// Tag samples as train/val with a seeded, optionally stratified split.
    Split(SplitArgs),
    /// Train a tagger, or run the multi-seed protocol with --test.
    Train(TrainArgs),
    /// Train one model per grid point and keep the best on validation.
    GridSearch(GridSearchArgs),
    /// Write predicted spans for every sample of a corpus.
    Predict(PredictArgs),
    /// Strict and partial precision, recall and F1 against gold spans.
    Evaluate(EvaluateArgs),
    /// McNemar test (and optionally Mann-Whitney) between two systems.
    Compare(CompareArgs),
    /// Readability and length statistics of predicted entities.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    pub format: CorpusFormat,
    /// Annotation type to keep (overrides `corpus.label`).
    #[arg(long)]
    pub label: Option<String>,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Share of samples tagged train (overrides `corpus.train_ratio`).
    #[arg(long)]
    pub ratio: Option<f64>,
    #[arg(long)]
    pub no_stratify: bool,
}

#[derive(Debug, Args, Default)]
pub struct TrainOverrides {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Decode by row arg-max instead of a CRF.
    #[arg(long, conflicts_with = "constrained")]
    pub no_crf: bool,
    /// Forbid O→I and start→I transitions.
    #[arg(long)]
    pub constrained: bool,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// JSONL corpus; samples tagged train are trained on, val drives model selection.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Held-out corpus scored after training.
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Comma-separated seeds; with --test retrains on train+val once per seed.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    /// Vocabulary file; built from the corpus words when absent.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Fit only the CRF on precomputed emissions from this store.
    #[arg(long, requires = "vocab")]
    pub emissions: Option<PathBuf>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct GridSearchArgs {
    /// JSONL corpus with train and val samples.
    #[arg(long)]
    pub corpus: PathBuf,
    /// When given, the winner is retrained per seed on train+val and scored here.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub learning_rates: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub dropouts: Option<Vec<f64>>,
    #[command(flatten)]
    pub overrides: TrainOverrides,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Model directory written by `train`.
    #[arg(long, conflicts_with_all = ["emissions", "crf"])]
    pub model: Option<PathBuf>,
    /// Emission store used instead of a model directory.
    #[arg(long, requires = "vocab")]
    pub emissions: Option<PathBuf>,
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// CRF record; without it rows decode by arg-max.
    #[arg(long, requires = "emissions")]
    pub crf: Option<PathBuf>,
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub lowercase: bool,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Predictions of the first system.
    #[arg(long = "system-a")]
    pub system_a: PathBuf,
    /// Predictions of the second system.
    #[arg(long = "system-b")]
    pub system_b: PathBuf,
    /// Also run Mann-Whitney on per-sample strict F1 over gold-positive samples.
    #[arg(long)]
    pub mann_whitney: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// One predictions file per system.
    #[arg(long, required = true, num_args = 1..)]
    pub predictions: Vec<PathBuf>,
    /// Gold corpus used to recover surfaces that a predictions file lacks.
    #[arg(long)]
    pub gold: Option<PathBuf>,
    #[arg(long)]
    pub familiar_words: Option<PathBuf>,
}

/// Failure of a command, carrying its exit status.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failed(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Failed(Error::Config(_)) | CliError::Failed(Error::Argument(_)) => 2,
            CliError::Failed(Error::Io { source, .. }) if source.kind() == std::io::ErrorKind::NotFound => 2,
            CliError::Failed(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(message) => write!(f, "{message}"),
            CliError::Failed(Error::Io { path, source }) if source.kind() == std::io::ErrorKind::NotFound => {
                write!(f, "{}: no such file or directory", path.display())
            }
            CliError::Failed(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Failed(e)
    }
}

/// Parses `args` (program name first), runs the command and returns the exit
/// status: 0 on success, 1 on operational failure, 2 on usage errors.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default())
        .filter_level(level)
        .parse_default_env()
        .try_init();
    match commands::dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
