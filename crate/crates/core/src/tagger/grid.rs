//! Hyperparameter grid search and the multi-seed evaluation protocol.

use serde::{Deserialize, Serialize};

use super::pipeline::Tagger;
use super::train::{evaluate, train, CorpusScores, RunReport, SeedRun, SelectionMetric, TrainConfig};
use crate::corpus::{Corpus, Split};
use crate::error::{Error, Result};
use crate::tokenizer::Vocabulary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub learning_rates: Vec<f64>,
    pub dropouts: Vec<f64>,
    pub selection: SelectionMetric,
}

impl GridSpec {
    /// Learning rates 5e-4, 5e-5, 5e-6 crossed with dropout 0.15 to 0.30 in
    /// steps of 0.05, selected on validation partial F1.
    pub fn standard() -> Self {
        Self {
            learning_rates: vec![5e-4, 5e-5, 5e-6],
            dropouts: vec![0.15, 0.20, 0.25, 0.30],
            selection: SelectionMetric::PartialF1,
        }
    }

    /// Grid points ordered by ascending learning rate, then ascending dropout.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut lrs = self.learning_rates.clone();
        let mut drops = self.dropouts.clone();
        lrs.sort_by(f64::total_cmp);
        drops.sort_by(f64::total_cmp);
        lrs.dedup();
        drops.dedup();
        lrs.iter().flat_map(|&lr| drops.iter().map(move |&d| (lr, d))).collect()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridTrial {
    pub learning_rate: f64,
    pub dropout: f64,
    pub best_epoch: usize,
    pub validation: CorpusScores,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridOutcome {
    pub trials: Vec<GridTrial>,
    pub best_index: usize,
    /// Winning configuration, with `epochs` set to its best epoch.
    pub best: TrainConfig,
}

/// Trains one model per grid point on `train_split` and scores it on
/// `val_split`. Ties on the selection metric go to the lower learning rate,
/// then the lower dropout.
pub fn grid_search(
    train_split: &Corpus,
    val_split: &Corpus,
    vocab: &Vocabulary,
    spec: &GridSpec,
    base: &TrainConfig,
) -> Result<GridOutcome> {
    if val_split.is_empty() {
        return Err(Error::argument("grid search needs a non-empty validation split"));
    }
    let points = spec.points();
    if points.is_empty() {
        return Err(Error::Config("grid has no points".into()));
    }
    let corpus = train_split
        .clone()
        .with_split(Split::Train)
        .concat(&val_split.clone().with_split(Split::Val))?;

    let mut trials = Vec::with_capacity(points.len());
    for (lr, dropout) in points {
        let config = TrainConfig {
            learning_rate: lr,
            dropout,
            selection: spec.selection,
            ..base.clone()
        };
        let (_, report) = train(&corpus, vocab, &config)?;
        let run = &report.runs[0];
        let validation = run.scores.expect("validation split is non-empty");
        let score = validation.metric(spec.selection);
        log::info!(
            "grid lr={lr:e} dropout={dropout}: {score:.4} at epoch {}",
            run.best_epoch
        );
        trials.push(GridTrial {
            learning_rate: lr,
            dropout,
            best_epoch: run.best_epoch,
            validation,
            score,
        });
    }
    let best_index = first_best(trials.iter().map(|t| t.score));
    let winner = &trials[best_index];
    let best = TrainConfig {
        learning_rate: winner.learning_rate,
        dropout: winner.dropout,
        epochs: winner.best_epoch,
        selection: spec.selection,
        ..base.clone()
    };
    Ok(GridOutcome {
        trials,
        best_index,
        best,
    })
}

/// Index of the first strictly greatest score.
fn first_best(scores: impl IntoIterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, score) in scores.into_iter().enumerate() {
        if score > best.1 {
            best = (i, score);
        }
    }
    best.0
}

/// Retrains `config` on `train_val` (all samples treated as training data)
/// once per seed and scores each model on `test`.
pub fn multi_seed(
    config: &TrainConfig,
    seeds: &[u64],
    train_val: &Corpus,
    test: &Corpus,
    vocab: &Vocabulary,
) -> Result<RunReport> {
    multi_seed_with(config, seeds, train_val, test, vocab, |_, _| Ok(()))
}

/// [`multi_seed`] handing every trained model to `on_model` before it is
/// dropped.
pub fn multi_seed_with(
    config: &TrainConfig,
    seeds: &[u64],
    train_val: &Corpus,
    test: &Corpus,
    vocab: &Vocabulary,
    mut on_model: impl FnMut(u64, &Tagger) -> Result<()>,
) -> Result<RunReport> {
    if seeds.is_empty() {
        return Err(Error::argument("at least one seed is required"));
    }
    let corpus = train_val.clone().with_split(Split::Train);
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let seeded = TrainConfig { seed, ..config.clone() };
        let (tagger, report) = train(&corpus, vocab, &seeded)?;
        let scores = evaluate(&tagger, test, config.threads)?;
        on_model(seed, &tagger)?;
        let run = report.runs.into_iter().next().expect("single run");
        runs.push(SeedRun {
            scores: Some(scores),
            ..run
        });
    }
    Ok(RunReport::new(config, runs))
}
