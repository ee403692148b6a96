//! Mini-batch training of the toy encoder, optionally joint with the CRF.

use std::fmt::Write as _;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encoder::{EncoderParams, EncoderShape, ToyEncoder};
use super::optim::Adam;
use super::pipeline::Tagger;
use super::provider::EmissionProvider;
use crate::corpus::{CharSpan, Corpus, Split};
use crate::crf::{nll_gradients, CrfParams, EmissionMatrix};
use crate::error::{Error, Result};
use crate::eval::{corpus_f1, match_entities, mean_std, EntityMatchReport, MatchMode, Prf};
use crate::labeling::{propagate_labels, spans_to_iob, split_words, Label};
use crate::tokenizer::{encode, Vocabulary, DEFAULT_MAX_LEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMetric {
    PartialF1,
    StrictF1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CrfTraining {
    /// Encoder and CRF trained together on the CRF negative log-likelihood.
    Joint,
    /// Encoder trained on token cross-entropy, CRF fitted afterwards on its
    /// frozen emissions.
    PostHoc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub with_crf: bool,
    pub constrained: bool,
    pub crf_training: CrfTraining,
    pub selection: SelectionMetric,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
    pub max_len: usize,
    /// Worker threads for per-sample gradients; results do not depend on it.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 50,
            learning_rate: 5e-3,
            dropout: 0.1,
            batch_size: 16,
            seed: 0,
            with_crf: true,
            constrained: false,
            crf_training: CrfTraining::Joint,
            selection: SelectionMetric::PartialF1,
            d_model: 32,
            heads: 2,
            ff_dim: 64,
            max_len: DEFAULT_MAX_LEN,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be a non-negative number".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must lie in [0, 1)".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if self.max_len < 3 {
            return Err(Error::Config("max_len must be at least 3".into()));
        }
        Ok(())
    }

    fn shape(&self, vocab: &Vocabulary) -> EncoderShape {
        EncoderShape {
            vocab_size: vocab.len(),
            max_len: self.max_len,
            d_model: self.d_model,
            heads: self.heads,
            ff_dim: self.ff_dim,
        }
    }
}

/// Strict and partial micro-averaged scores over a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorpusScores {
    pub strict: Prf,
    pub partial: Prf,
}

impl CorpusScores {
    pub fn from_spans<'a>(pairs: impl IntoIterator<Item = (&'a [CharSpan], &'a [CharSpan])>) -> Self {
        let mut strict: Vec<EntityMatchReport> = Vec::new();
        let mut partial: Vec<EntityMatchReport> = Vec::new();
        for (gold, pred) in pairs {
            strict.push(match_entities(gold, pred, MatchMode::Strict));
            partial.push(match_entities(gold, pred, MatchMode::Partial));
        }
        Self {
            strict: corpus_f1(&strict),
            partial: corpus_f1(&partial),
        }
    }

    pub fn metric(&self, metric: SelectionMetric) -> f64 {
        match metric {
            SelectionMetric::PartialF1 => self.partial.f1,
            SelectionMetric::StrictF1 => self.strict.f1,
        }
    }

    /// Named values in a fixed order.
    pub fn named(&self) -> [(&'static str, f64); 6] {
        [
            ("partial_f1", self.partial.f1),
            ("strict_f1", self.strict.f1),
            ("partial_precision", self.partial.precision),
            ("partial_recall", self.partial.recall),
            ("strict_precision", self.strict.precision),
            ("strict_recall", self.strict.recall),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparameters {
    pub learning_rate: f64,
    pub dropout: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    /// Mean training loss per epoch.
    pub loss_curve: Vec<f64>,
    /// Selection metric on the validation split per epoch (empty without one).
    pub validation_curve: Vec<f64>,
    /// Scores of the kept parameters on the evaluation split, when there is one.
    pub scores: Option<CorpusScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    /// Sample standard deviation; absent with fewer than two runs.
    pub std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub hyperparameters: Hyperparameters,
    pub with_crf: bool,
    pub runs: Vec<SeedRun>,
    pub summary: Vec<MetricSummary>,
}

impl RunReport {
    pub(crate) fn new(config: &TrainConfig, runs: Vec<SeedRun>) -> Self {
        let scored: Vec<CorpusScores> = runs.iter().filter_map(|r| r.scores).collect();
        let mut summary = Vec::new();
        if !scored.is_empty() {
            for (i, (name, _)) in scored[0].named().iter().enumerate() {
                let values: Vec<f64> = scored.iter().map(|s| s.named()[i].1).collect();
                let (mean, std) = mean_std(&values);
                summary.push(MetricSummary {
                    name: name.to_string(),
                    mean,
                    std,
                });
            }
        }
        Self {
            hyperparameters: Hyperparameters {
                learning_rate: config.learning_rate,
                dropout: config.dropout,
                epochs: config.epochs,
            },
            with_crf: config.with_crf,
            runs,
            summary,
        }
    }

    pub fn metric(&self, name: &str) -> Option<&MetricSummary> {
        self.summary.iter().find(|m| m.name == name)
    }

    /// `"77.7 ± 0.3"`-style cell: percentage with one decimal.
    pub fn cell(&self, name: &str) -> String {
        match self.metric(name) {
            Some(MetricSummary {
                mean, std: Some(std), ..
            }) => format!("{:.1} ± {:.1}", mean * 100.0, std * 100.0),
            Some(MetricSummary { mean, std: None, .. }) => format!("{:.1}", mean * 100.0),
            None => "--".to_string(),
        }
    }

    /// Partial and strict F1 with standard deviations, one row per architecture.
    pub fn f1_table(rows: &[(&str, &RunReport)]) -> String {
        let width = rows.iter().map(|(n, _)| n.chars().count()).max().unwrap_or(0).max(12);
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:<width$}  {:>14}  {:>14}",
            "Architecture", "Partial F1", "Strict F1"
        );
        for (name, report) in rows {
            let _ = writeln!(
                out,
                "{:<width$}  {:>14}  {:>14}",
                name,
                report.cell("partial_f1"),
                report.cell("strict_f1")
            );
        }
        out
    }
}

/// A training sample: unmasked token ids and the content-piece labels.
#[derive(Debug, Clone)]
pub(crate) struct Example {
    pub ids: Vec<u32>,
    pub labels: Vec<Label>,
}

pub(crate) fn prepare_examples(corpus: &Corpus, vocab: &Vocabulary, max_len: usize) -> Result<Vec<Example>> {
    let mut out = Vec::with_capacity(corpus.len());
    for sample in corpus.samples() {
        let words = split_words(&sample.text);
        let encoded = encode(&sample.id, &words, vocab, max_len);
        if encoded.content_len() == 0 {
            continue;
        }
        let word_labels = spans_to_iob(&words, sample.spans());
        let kept: Vec<Label> = encoded.word_alignment.iter().map(|&(w, _)| word_labels[w]).collect();
        let labels = propagate_labels(&kept, &encoded.pieces_per_word())?.labels;
        out.push(Example {
            ids: encoded.unmasked_ids().to_vec(),
            labels,
        });
    }
    Ok(out)
}

/// Loss of one example and its gradients. Only content rows enter the loss;
/// `[CLS]` and `[SEP]` rows receive zero gradient.
pub(crate) fn example_gradient(
    encoder: &ToyEncoder,
    crf: Option<&CrfParams>,
    example: &Example,
    dropout: f64,
    seed: u64,
) -> Result<(f64, EncoderParams, Option<CrfParams>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cache = encoder.forward(&example.ids, Some((dropout, &mut rng)))?;
    let content = example.labels.len();
    let mut d_log_probs = Array2::zeros(cache.log_probs.dim());
    let (loss, crf_grad) = match crf {
        Some(params) => {
            let rows = cache.log_probs.slice(ndarray::s![1..=content, ..]).to_owned();
            let e = EmissionMatrix::new(rows)?;
            let gold = crate::crf::score_sequence(&e, &example.labels, params)?;
            let loss = crate::crf::log_partition(&e, params) - gold;
            let (d_e, d_crf) = nll_gradients(&e, &example.labels, params)?;
            d_log_probs.slice_mut(ndarray::s![1..=content, ..]).assign(&d_e);
            (loss, Some(d_crf))
        }
        None => {
            let mut loss = 0.0;
            for (t, label) in example.labels.iter().enumerate() {
                loss -= cache.log_probs[[t + 1, label.index()]];
                d_log_probs[[t + 1, label.index()]] = -1.0;
            }
            (loss, None)
        }
    };
    let grads = encoder.backward(&example.ids, &cache, d_log_probs.view());
    Ok((loss, grads, crf_grad))
}

fn mix_seed(seed: u64, epoch: usize, index: usize) -> u64 {
    // splitmix64 finalizer over the packed triple
    let mut z = seed ^ ((epoch as u64) << 32) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluation inputs precomputed once per split.
struct EvalSet {
    samples: Vec<(
        Vec<crate::labeling::WordToken>,
        crate::tokenizer::TokenizedSample,
        Vec<CharSpan>,
    )>,
}

impl EvalSet {
    fn new(corpus: &Corpus, vocab: &Vocabulary, max_len: usize) -> Self {
        let samples = corpus
            .samples()
            .iter()
            .map(|s| {
                let words = split_words(&s.text);
                let encoded = encode(&s.id, &words, vocab, max_len);
                (words, encoded, s.spans().to_vec())
            })
            .collect();
        Self { samples }
    }

    fn score(&self, encoder: &ToyEncoder, crf: Option<&CrfParams>) -> Result<CorpusScores> {
        let mut predicted = Vec::with_capacity(self.samples.len());
        for (words, encoded, _) in &self.samples {
            let emissions = if encoded.content_len() > 0 {
                Some(EmissionMatrix::new(encoder.log_probs(encoded.unmasked_ids())?)?)
            } else {
                None
            };
            predicted.push(super::pipeline::decode_spans(emissions.as_ref(), crf, words, encoded)?);
        }
        Ok(CorpusScores::from_spans(
            self.samples
                .iter()
                .zip(&predicted)
                .map(|((_, _, gold), pred)| (gold.as_slice(), pred.as_slice())),
        ))
    }
}

/// Trains on the `train` split of `corpus`. When a `val` split exists the
/// parameters of the epoch with the best validation metric are kept (earliest
/// epoch on ties); otherwise the final parameters are kept.
pub fn train(corpus: &Corpus, vocab: &Vocabulary, config: &TrainConfig) -> Result<(Tagger, RunReport)> {
    config.validate()?;
    let train_split = corpus.subset(Split::Train);
    if train_split.is_empty() {
        return Err(Error::argument("corpus has no samples tagged train"));
    }
    let examples = prepare_examples(&train_split, vocab, config.max_len)?;
    if examples.is_empty() {
        return Err(Error::argument("training split has no tokenizable samples"));
    }
    let val_split = corpus.subset(Split::Val);
    let val = (!val_split.is_empty()).then(|| EvalSet::new(&val_split, vocab, config.max_len));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut encoder = ToyEncoder::init(config.shape(vocab), &mut rng)?;
    let joint = config.with_crf && config.crf_training == CrfTraining::Joint;
    let mut crf = joint.then(|| CrfParams::random(&mut rng, config.constrained));

    let parameter_count = encoder.params.blocks().iter().map(|b| b.len()).sum::<usize>()
        + crf.as_ref().map_or(0, |c| c.blocks().iter().map(|b| b.len()).sum());
    let mut adam = Adam::new(config.learning_rate, parameter_count);
    let pool = thread_pool(config.threads)?;

    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut validation_curve = Vec::new();
    let mut best: Option<(f64, usize, ToyEncoder, Option<CrfParams>, CorpusScores)> = None;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let compute = |(slot, &i): (usize, &usize)| {
                let seed = mix_seed(config.seed, epoch, batch_index * config.batch_size + slot);
                example_gradient(&encoder, crf.as_ref(), &examples[i], config.dropout, seed)
            };
            let results: Vec<_> = match &pool {
                Some(pool) => pool.install(|| batch.par_iter().enumerate().map(compute).collect()),
                None => batch.iter().enumerate().map(compute).collect(),
            };
            let mut enc_grad = EncoderParams::zeros(&encoder.shape);
            let mut crf_grad = CrfParams::zeros(false);
            for result in results {
                let (loss, g, c) = result?;
                epoch_loss += loss;
                enc_grad.add_assign(&g);
                if let Some(c) = c {
                    for (dst, src) in crf_grad.blocks_mut().into_iter().zip(c.blocks()) {
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
            }
            let scale = 1.0 / batch.len() as f64;
            enc_grad.scale(scale);
            crf_grad
                .blocks_mut()
                .into_iter()
                .for_each(|b| b.iter_mut().for_each(|v| *v *= scale));

            let mut params = encoder.params.blocks_mut();
            let mut grads = enc_grad.blocks();
            if let Some(c) = crf.as_mut() {
                params.extend(c.blocks_mut());
                grads.extend(crf_grad.blocks());
            }
            adam.step(params, grads);
        }
        loss_curve.push(epoch_loss / examples.len() as f64);

        if let Some(val) = &val {
            let scores = val.score(&encoder, crf.as_ref())?;
            let metric = scores.metric(config.selection);
            validation_curve.push(metric);
            if best.as_ref().is_none_or(|(m, ..)| metric > *m) {
                best = Some((metric, epoch + 1, encoder.clone(), crf.clone(), scores));
            }
        }
    }

    let (best_epoch, scores) = match best {
        Some((_, epoch, enc, c, scores)) => {
            encoder = enc;
            crf = c;
            (epoch, Some(scores))
        }
        None => (config.epochs, None),
    };

    let mut scores = scores;
    if config.with_crf && config.crf_training == CrfTraining::PostHoc {
        let data = examples
            .iter()
            .map(|ex| {
                let lp = encoder.log_probs(&ex.ids)?;
                let rows = lp.slice(ndarray::s![1..=ex.labels.len(), ..]).to_owned();
                Ok((EmissionMatrix::new(rows)?, ex.labels.clone()))
            })
            .collect::<Result<Vec<_>>>()?;
        let fitted = train_crf_posthoc(&data, config)?;
        if let Some(val) = &val {
            scores = Some(val.score(&encoder, Some(&fitted))?);
        }
        crf = Some(fitted);
    }

    let report = RunReport::new(
        config,
        vec![SeedRun {
            seed: config.seed,
            best_epoch,
            loss_curve,
            validation_curve,
            scores,
        }],
    );
    let tagger = Tagger {
        vocab: vocab.clone(),
        provider: EmissionProvider::ToyEncoder(encoder),
        crf,
        max_len: config.max_len,
    };
    Ok((tagger, report))
}

/// Fits CRF parameters alone on fixed emission matrices and their gold
/// labels, using `epochs`, `learning_rate`, `batch_size`, `seed` and
/// `constrained` from `config`.
pub fn train_crf_posthoc(data: &[(EmissionMatrix, Vec<Label>)], config: &TrainConfig) -> Result<CrfParams> {
    if data.is_empty() {
        return Err(Error::argument("no emission matrices to fit the CRF on"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = CrfParams::random(&mut rng, config.constrained);
    let count = params.blocks().iter().map(|b| b.len()).sum();
    let mut adam = Adam::new(config.learning_rate, count);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut grad = CrfParams::zeros(false);
            for &i in batch {
                let (e, y) = &data[i];
                let (_, g) = nll_gradients(e, y, &params)?;
                for (dst, src) in grad.blocks_mut().into_iter().zip(g.blocks()) {
                    dst.iter_mut().zip(src).for_each(|(d, s)| *d += s / batch.len() as f64);
                }
            }
            adam.step(params.blocks_mut().into(), grad.blocks().into());
        }
    }
    Ok(params)
}

/// Content-row emissions from `provider` paired with gold piece labels, one
/// pair per sample with at least one content piece. Feeds
/// [`train_crf_posthoc`] when emissions come from outside.
pub fn emission_training_pairs(
    corpus: &Corpus,
    vocab: &Vocabulary,
    provider: &EmissionProvider,
    max_len: usize,
) -> Result<Vec<(EmissionMatrix, Vec<Label>)>> {
    let mut out = Vec::with_capacity(corpus.len());
    for sample in corpus.samples() {
        let words = split_words(&sample.text);
        let encoded = encode(&sample.id, &words, vocab, max_len);
        if encoded.content_len() == 0 {
            continue;
        }
        let word_labels = spans_to_iob(&words, sample.spans());
        let kept: Vec<Label> = encoded.word_alignment.iter().map(|&(w, _)| word_labels[w]).collect();
        let labels = propagate_labels(&kept, &encoded.pieces_per_word())?.labels;
        let emissions = provider.emissions(&encoded, super::provider::EmissionMode::Eval)?;
        let content = super::pipeline::content_rows(&emissions, encoded.content_len());
        out.push((EmissionMatrix::new(content)?, labels));
    }
    Ok(out)
}

/// Scores a tagger on every sample of `corpus`.
pub fn evaluate(tagger: &Tagger, corpus: &Corpus, threads: usize) -> Result<CorpusScores> {
    let predictions = tagger.predict_corpus(corpus, threads)?;
    Ok(CorpusScores::from_spans(
        corpus
            .samples()
            .iter()
            .zip(&predictions)
            .map(|(s, p)| (s.spans(), p.spans.as_slice())),
    ))
}

fn thread_pool(threads: usize) -> Result<Option<rayon::ThreadPool>> {
    if threads <= 1 {
        return Ok(None);
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map(Some)
        .map_err(|e| Error::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AnnotatedSample;
    use crate::synthetic::{generate, SyntheticConfig};
    use crate::tokenizer::corpus_vocab;

    fn small() -> TrainConfig {
        TrainConfig {
            epochs: 3,
            d_model: 8,
            heads: 2,
            ff_dim: 8,
            batch_size: 4,
            ..Default::default()
        }
    }

    fn tiny_corpus() -> (Corpus, Vocabulary) {
        let corpus = generate(&SyntheticConfig {
            train: 16,
            val: 8,
            test: 0,
            seed: 1,
            ..Default::default()
        });
        let vocab = corpus_vocab(&corpus, false);
        (corpus, vocab)
    }

    #[test]
    fn validate_rejects_bad_values() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig {
                epochs: 0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..Default::default()
            },
            TrainConfig {
                learning_rate: f64::NAN,
                ..Default::default()
            },
            TrainConfig {
                dropout: 1.0,
                ..Default::default()
            },
            TrainConfig {
                batch_size: 0,
                ..Default::default()
            },
            TrainConfig {
                max_len: 2,
                ..Default::default()
            },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))), "{bad:?}");
        }
    }

    #[test]
    fn mixed_seeds_differ() {
        let seeds: std::collections::HashSet<u64> =
            (0..4).flat_map(|e| (0..64).map(move |i| mix_seed(7, e, i))).collect();
        assert_eq!(seeds.len(), 256);
        assert_ne!(mix_seed(1, 0, 0), mix_seed(2, 0, 0));
    }

    #[test]
    fn examples_carry_piece_labels() {
        let vocab = Vocabulary::fixture(["bad", "head"], ["##ache"]);
        let corpus = Corpus::new(vec![
            AnnotatedSample::new("a", "bad headache", vec![CharSpan::new(4, 12)]).unwrap(),
            AnnotatedSample::new("b", "", vec![]).unwrap(),
        ])
        .unwrap();
        let examples = prepare_examples(&corpus, &vocab, 16).unwrap();
        assert_eq!(examples.len(), 1);
        assert_eq!(examples[0].labels, [Label::O, Label::B, Label::I]);
        assert_eq!(examples[0].ids.len(), 5);
    }

    #[test]
    fn cross_entropy_loss_without_dropout() {
        let vocab = Vocabulary::fixture(["bad", "head"], ["##ache"]);
        let corpus = Corpus::new(vec![AnnotatedSample::new(
            "a",
            "bad headache",
            vec![CharSpan::new(4, 12)],
        )
        .unwrap()])
        .unwrap();
        let example = &prepare_examples(&corpus, &vocab, 16).unwrap()[0];
        let encoder = ToyEncoder::init(small().shape(&vocab), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let (loss, _, crf) = example_gradient(&encoder, None, example, 0.0, 0).unwrap();
        let lp = encoder.log_probs(&example.ids).unwrap();
        let expected: f64 = example
            .labels
            .iter()
            .enumerate()
            .map(|(t, l)| -lp[[t + 1, l.index()]])
            .sum();
        assert!((loss - expected).abs() < 1e-12);
        assert!(crf.is_none());
    }

    #[test]
    fn zero_learning_rate_keeps_initial_parameters() {
        let (corpus, vocab) = tiny_corpus();
        let config = TrainConfig {
            learning_rate: 0.0,
            ..small()
        };
        let (tagger, _) = train(&corpus, &vocab, &config).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let initial = ToyEncoder::init(config.shape(&vocab), &mut rng).unwrap();
        let crf = CrfParams::random(&mut rng, false);
        assert_eq!(tagger.provider.as_encoder().unwrap(), &initial);
        assert_eq!(tagger.crf.unwrap(), crf);
    }

    #[test]
    fn same_seed_same_report_any_thread_count() {
        let (corpus, vocab) = tiny_corpus();
        let (_, a) = train(&corpus, &vocab, &small()).unwrap();
        let (_, b) = train(&corpus, &vocab, &small()).unwrap();
        let (_, c) = train(&corpus, &vocab, &TrainConfig { threads: 3, ..small() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let (_, d) = train(&corpus, &vocab, &TrainConfig { seed: 1, ..small() }).unwrap();
        assert_ne!(a.runs[0].loss_curve, d.runs[0].loss_curve);
    }

    #[test]
    fn keeps_earliest_best_validation_epoch() {
        let (corpus, vocab) = tiny_corpus();
        let (_, report) = train(&corpus, &vocab, &TrainConfig { epochs: 4, ..small() }).unwrap();
        let run = &report.runs[0];
        assert_eq!(run.loss_curve.len(), 4);
        assert_eq!(run.validation_curve.len(), 4);
        let best = run.validation_curve.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = run.validation_curve.iter().position(|&v| v == best).unwrap();
        assert_eq!(run.best_epoch, first + 1);
    }

    #[test]
    fn without_validation_the_last_epoch_is_kept() {
        let (corpus, vocab) = tiny_corpus();
        let (_, report) = train(&corpus.subset(Split::Train), &vocab, &small()).unwrap();
        assert_eq!(report.runs[0].best_epoch, 3);
        assert!(report.runs[0].scores.is_none());
        assert!(report.summary.is_empty());
        assert_eq!(report.cell("strict_f1"), "--");
    }

    #[test]
    fn post_hoc_crf_and_no_crf_modes() {
        let (corpus, vocab) = tiny_corpus();
        let (tagger, report) = train(
            &corpus,
            &vocab,
            &TrainConfig {
                crf_training: CrfTraining::PostHoc,
                ..small()
            },
        )
        .unwrap();
        assert!(tagger.crf.is_some());
        assert!(report.runs[0].scores.is_some());
        let (tagger, report) = train(
            &corpus,
            &vocab,
            &TrainConfig {
                with_crf: false,
                ..small()
            },
        )
        .unwrap();
        assert!(tagger.crf.is_none());
        assert!(!report.with_crf);
    }

    #[test]
    fn needs_training_samples() {
        let (corpus, vocab) = tiny_corpus();
        let err = train(&corpus.subset(Split::Val), &vocab, &small()).unwrap_err();
        assert!(matches!(err, Error::Argument(_)));
        assert!(train_crf_posthoc(&[], &small()).is_err());
    }

    #[test]
    fn report_cells() {
        let prf = |f1| Prf {
            precision: f1,
            recall: f1,
            f1,
        };
        let run = |seed, f1| SeedRun {
            seed,
            best_epoch: 1,
            loss_curve: vec![],
            validation_curve: vec![],
            scores: Some(CorpusScores {
                strict: prf(f1),
                partial: prf(f1),
            }),
        };
        let report = RunReport::new(&TrainConfig::default(), vec![run(1, 0.774), run(2, 0.780)]);
        assert_eq!(report.cell("strict_f1"), "77.7 ± 0.4");
        let single = RunReport::new(&TrainConfig::default(), vec![run(1, 0.5)]);
        assert_eq!(single.cell("partial_f1"), "50.0");
        let table = RunReport::f1_table(&[("toy+CRF", &report)]);
        assert_eq!(table.lines().count(), 2);
        assert!(table.lines().nth(1).unwrap().trim_end().ends_with("77.7 ± 0.4"));
    }
}
