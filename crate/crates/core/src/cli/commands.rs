use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::manifest::{sidecar_path, RunManifest};
use super::tables::{p_value, render};
use super::{
    AnalyzeArgs, Cli, CliError, Command, CompareArgs, ConvertArgs, EvaluateArgs, GridSearchArgs, PredictArgs,
    SplitArgs, TrainArgs, TrainOverrides,
};
use crate::corpus::{
    char_slice, load_corpus, load_corpus_with, split_corpus, write_corpus, AnnotatedSample, Corpus, CorpusFormat,
    LoadOptions, Split,
};
use crate::crf::CrfParams;
use crate::error::{Error, Result};
use crate::eval::{
    corpus_f1, mann_whitney_u, match_entities, mcnemar, prediction_text_stats, read_predictions, write_predictions,
    EntityMatchReport, FamiliarWords, MannWhitney, MatchMode, McNemar, Prediction, TestMethod, TextMetrics, TextStats,
    TextStatsSummary,
};
use crate::tagger::{
    emission_training_pairs, evaluate, grid_search, load_model, multi_seed, multi_seed_with, save_model, train,
    train_crf_posthoc, CorpusScores, EmissionProvider, EmissionStore, GridOutcome, RunReport, SeedRun, Tagger,
    TrainConfig,
};
use crate::tokenizer::{corpus_vocab, load_vocab, Vocabulary, DEFAULT_MAX_LEN};

type CliResult<T = ()> = std::result::Result<T, CliError>;

struct Run<'a> {
    cli: &'a Cli,
    config: ExperimentConfig,
    started: Instant,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn out(&self, command: &str) -> CliResult<&'a Path> {
        self.cli
            .common
            .out
            .as_deref()
            .ok_or_else(|| CliError::Usage(format!("{command} requires --out")))
    }

    fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    fn threads(&self) -> usize {
        self.config.train.threads
    }

    /// Writes the manifest to `path`, or logs it when there is nowhere to put it.
    fn finish(mut self, command: &str, path: Option<PathBuf>) -> CliResult {
        let snapshot = serde_json::to_value(&self.config).map_err(Error::from)?;
        let mut manifest = RunManifest::new(command, snapshot);
        manifest.seeds = std::mem::take(&mut self.seeds);
        for input in &self.inputs {
            manifest.input(input)?;
        }
        for output in &self.outputs {
            manifest.output(output);
        }
        manifest.finish(self.started.elapsed());
        match path {
            Some(path) => manifest.write(&path)?,
            None => log::info!("manifest: {}", serde_json::to_string(&manifest).map_err(Error::from)?),
        }
        Ok(())
    }
}

pub(super) fn dispatch(cli: &Cli) -> CliResult {
    let started = Instant::now();
    let mut config = match &cli.common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.train.seed = seed;
    }
    if let Some(threads) = cli.common.threads {
        config.train.threads = threads;
    }
    let mut run = Run {
        cli,
        config,
        started,
        seeds: Vec::new(),
        inputs: Vec::new(),
        outputs: Vec::new(),
    };
    if let Some(path) = &cli.common.config {
        run.input(path);
    }
    match &cli.command {
        Command::Convert(args) => convert(run, args),
        Command::Split(args) => split(run, args),
        Command::Train(args) => train_cmd(run, args),
        Command::GridSearch(args) => grid_cmd(run, args),
        Command::Predict(args) => predict(run, args),
        Command::Evaluate(args) => evaluate_cmd(run, args),
        Command::Compare(args) => compare(run, args),
        Command::Analyze(args) => analyze(run, args),
    }
}

fn apply_overrides(config: &mut ExperimentConfig, o: &TrainOverrides) -> Result<()> {
    let t = &mut config.train;
    if let Some(v) = o.epochs {
        t.epochs = v;
    }
    if let Some(v) = o.learning_rate {
        t.learning_rate = v;
    }
    if let Some(v) = o.dropout {
        t.dropout = v;
    }
    if let Some(v) = o.batch_size {
        t.batch_size = v;
    }
    if let Some(v) = o.max_len {
        t.max_len = v;
    }
    if o.no_crf {
        t.with_crf = false;
    }
    if o.constrained {
        t.constrained = true;
    }
    if o.lowercase {
        config.corpus.lowercase = true;
    }
    config.train.validate()
}

fn load_jsonl(path: &Path) -> Result<Corpus> {
    load_corpus(path, CorpusFormat::Jsonl)
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let body = serde_json::to_string_pretty(value)?;
    fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
}

fn write_text(body: &str, path: &Path) -> Result<()> {
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn convert(mut run: Run, args: &ConvertArgs) -> CliResult {
    let out = run.out("convert")?;
    if let Some(label) = &args.label {
        run.config.corpus.label = label.clone();
    }
    let options = LoadOptions {
        label: run.config.corpus.label.clone(),
    };
    run.input(&args.input);
    let corpus = load_corpus_with(&args.input, args.format, &options)?;
    write_corpus(&corpus, out)?;
    run.outputs.push(out.to_path_buf());
    let mentions: usize = corpus.samples().iter().map(|s| s.spans().len()).sum();
    let positive = corpus.samples().iter().filter(|s| s.is_positive()).count();
    println!(
        "wrote {} samples ({positive} with mentions, {mentions} mentions) to {}",
        corpus.len(),
        out.display()
    );
    run.finish("convert", Some(sidecar_path(out, false)))
}

fn split(mut run: Run, args: &SplitArgs) -> CliResult {
    let out = run.out("split")?;
    if let Some(ratio) = args.ratio {
        run.config.corpus.train_ratio = ratio;
    }
    if args.no_stratify {
        run.config.corpus.stratify = false;
    }
    run.input(&args.input);
    let corpus = load_jsonl(&args.input)?;
    let seed = run.config.train.seed;
    run.seeds.push(seed);
    let (train_part, _) = split_corpus(&corpus, run.config.corpus.train_ratio, seed, run.config.corpus.stratify)?;
    let train_ids: HashSet<&str> = train_part.samples().iter().map(|s| s.id.as_str()).collect();
    let tagged: Vec<AnnotatedSample> = corpus
        .samples()
        .iter()
        .map(|s| {
            let split = if train_ids.contains(s.id.as_str()) {
                Split::Train
            } else {
                Split::Val
            };
            s.clone().with_split(split)
        })
        .collect();
    let tagged = Corpus::new(tagged)?;
    write_corpus(&tagged, out)?;
    run.outputs.push(out.to_path_buf());

    let rows: Vec<Vec<String>> = [Split::Train, Split::Val]
        .iter()
        .map(|&split| {
            let part = tagged.subset(split);
            let positive = part.samples().iter().filter(|s| s.is_positive()).count();
            vec![
                split.as_str().to_string(),
                positive.to_string(),
                (part.len() - positive).to_string(),
                part.len().to_string(),
            ]
        })
        .collect();
    print!("{}", render(&["Split", "Positive", "Negative", "Total"], &rows));
    run.finish("split", Some(sidecar_path(out, false)))
}

/// Machine-readable output of `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub report: RunReport,
    /// Scores on `--test` for a single-seed run.
    pub test: Option<CorpusScores>,
}

fn architecture(config: &TrainConfig, file_backed: bool) -> String {
    let encoder = if file_backed { "emissions" } else { "toy" };
    if config.with_crf {
        format!("{encoder}+CRF")
    } else {
        encoder.to_string()
    }
}

fn scores_table(rows: &[(String, CorpusScores)]) -> String {
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|(name, s)| {
            vec![
                name.clone(),
                format!("{:.4}", s.strict.precision),
                format!("{:.4}", s.strict.recall),
                format!("{:.4}", s.strict.f1),
                format!("{:.4}", s.partial.precision),
                format!("{:.4}", s.partial.recall),
                format!("{:.4}", s.partial.f1),
            ]
        })
        .collect();
    render(
        &[
            "Split",
            "Strict P",
            "Strict R",
            "Strict F1",
            "Partial P",
            "Partial R",
            "Partial F1",
        ],
        &body,
    )
}

fn resolve_vocab(run: &mut Run, path: Option<&PathBuf>, corpus: &Corpus) -> Result<Vocabulary> {
    let lowercase = run.config.corpus.lowercase;
    match path {
        Some(path) => {
            run.input(path);
            Ok(load_vocab(path)?.with_lowercase(lowercase))
        }
        None => Ok(corpus_vocab(corpus, lowercase)),
    }
}

fn train_cmd(mut run: Run, args: &TrainArgs) -> CliResult {
    let out = run.out("train")?;
    apply_overrides(&mut run.config, &args.overrides)?;
    run.input(&args.corpus);
    let corpus = load_jsonl(&args.corpus)?;
    let test = match &args.test {
        Some(path) => {
            run.input(path);
            Some(load_jsonl(path)?)
        }
        None => None,
    };
    if args.seeds.is_some() && test.is_none() {
        return Err(CliError::Usage(
            "--seeds runs the multi-seed protocol and needs --test".into(),
        ));
    }
    create_dir(out)?;
    let config = run.config.train.clone();

    let (record, text) = if let Some(store_path) = &args.emissions {
        run.input(store_path);
        let vocab_path = args.vocab.as_ref().expect("clap enforces --vocab");
        let vocab = resolve_vocab(&mut run, Some(vocab_path), &corpus)?;
        let store = EmissionStore::read(store_path)?;
        run.seeds.push(config.seed);
        train_file_backed(&config, &corpus, test.as_ref(), vocab, store, out, run.threads())?
    } else if let (Some(seeds), Some(test)) = (&args.seeds, &test) {
        let vocab = resolve_vocab(&mut run, args.vocab.as_ref(), &corpus)?;
        run.seeds = seeds.clone();
        let report = multi_seed_with(&config, seeds, &corpus, test, &vocab, |seed, tagger| {
            let seeded = TrainConfig { seed, ..config.clone() };
            save_model(tagger, &out.join(format!("seed-{seed}")), Some(&seeded))
        })?;
        let text = RunReport::f1_table(&[(&architecture(&config, false), &report)]);
        (TrainRecord { report, test: None }, text)
    } else {
        let vocab = resolve_vocab(&mut run, args.vocab.as_ref(), &corpus)?;
        run.seeds.push(config.seed);
        let (tagger, report) = train(&corpus, &vocab, &config)?;
        save_model(&tagger, out, Some(&config))?;
        let test_scores = test.as_ref().map(|t| evaluate(&tagger, t, run.threads())).transpose()?;
        let mut rows = Vec::new();
        if let Some(val) = report.runs[0].scores {
            rows.push(("val".to_string(), val));
        }
        if let Some(t) = test_scores {
            rows.push(("test".to_string(), t));
        }
        let mut text = format!(
            "{}: kept epoch {} of {}\n",
            architecture(&config, false),
            report.runs[0].best_epoch,
            config.epochs
        );
        if !rows.is_empty() {
            text.push_str(&scores_table(&rows));
        }
        (
            TrainRecord {
                report,
                test: test_scores,
            },
            text,
        )
    };
    print!("{text}");
    write_json(&record, &out.join("report.json"))?;
    write_text(&text, &out.join("report.txt"))?;
    run.outputs.push(out.to_path_buf());
    run.finish("train", Some(sidecar_path(out, true)))
}

fn train_file_backed(
    config: &TrainConfig,
    corpus: &Corpus,
    test: Option<&Corpus>,
    vocab: Vocabulary,
    store: EmissionStore,
    out: &Path,
    threads: usize,
) -> Result<(TrainRecord, String)> {
    let train_split = corpus.subset(Split::Train);
    if train_split.is_empty() {
        return Err(Error::argument("corpus has no samples tagged train"));
    }
    let provider = EmissionProvider::FileBacked(store);
    let crf: Option<CrfParams> = if config.with_crf {
        let pairs = emission_training_pairs(&train_split, &vocab, &provider, config.max_len)?;
        Some(train_crf_posthoc(&pairs, config)?)
    } else {
        None
    };
    let tagger = Tagger {
        vocab,
        provider,
        crf,
        max_len: config.max_len,
    };
    save_model(&tagger, out, Some(config))?;
    let val_split = corpus.subset(Split::Val);
    let val = (!val_split.is_empty())
        .then(|| evaluate(&tagger, &val_split, threads))
        .transpose()?;
    let test_scores = test.map(|t| evaluate(&tagger, t, threads)).transpose()?;
    let report = RunReport::new(
        config,
        vec![SeedRun {
            seed: config.seed,
            best_epoch: config.epochs,
            loss_curve: Vec::new(),
            validation_curve: Vec::new(),
            scores: val,
        }],
    );
    let mut rows = Vec::new();
    if let Some(v) = val {
        rows.push(("val".to_string(), v));
    }
    if let Some(t) = test_scores {
        rows.push(("test".to_string(), t));
    }
    let mut text = format!("{}: CRF fitted on stored emissions\n", architecture(config, true));
    if !rows.is_empty() {
        text.push_str(&scores_table(&rows));
    }
    Ok((
        TrainRecord {
            report,
            test: test_scores,
        },
        text,
    ))
}

/// Machine-readable output of `grid-search`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub outcome: GridOutcome,
    /// Multi-seed test report of the winner, when `--test` was given.
    pub report: Option<RunReport>,
}

fn grid_cmd(mut run: Run, args: &GridSearchArgs) -> CliResult {
    let out = run.out("grid-search")?;
    apply_overrides(&mut run.config, &args.overrides)?;
    if let Some(lrs) = &args.learning_rates {
        run.config.grid.learning_rates = lrs.clone();
    }
    if let Some(drops) = &args.dropouts {
        run.config.grid.dropouts = drops.clone();
    }
    if let Some(seeds) = &args.seeds {
        run.config.seeds = seeds.clone();
    }
    run.input(&args.corpus);
    let corpus = load_jsonl(&args.corpus)?;
    let train_split = corpus.subset(Split::Train);
    let val_split = corpus.subset(Split::Val);
    if train_split.is_empty() || val_split.is_empty() {
        return Err(CliError::Usage(format!(
            "{} needs samples tagged train and val (see `adetag split`)",
            args.corpus.display()
        )));
    }
    let test = match &args.test {
        Some(path) => {
            run.input(path);
            Some(load_jsonl(path)?)
        }
        None => None,
    };
    let train_val = train_split.concat(&val_split)?;
    let vocab = resolve_vocab(&mut run, args.vocab.as_ref(), &train_val)?;
    create_dir(out)?;

    run.seeds.push(run.config.train.seed);
    let outcome = grid_search(&train_split, &val_split, &vocab, &run.config.grid, &run.config.train)?;
    let rows: Vec<Vec<String>> = outcome
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            vec![
                if i == outcome.best_index {
                    "*".into()
                } else {
                    String::new()
                },
                format!("{:e}", t.learning_rate),
                format!("{:.2}", t.dropout),
                t.best_epoch.to_string(),
                format!("{:.4}", t.validation.partial.f1),
                format!("{:.4}", t.validation.strict.f1),
            ]
        })
        .collect();
    let mut text = render(
        &[
            "",
            "Learning rate",
            "Dropout",
            "Best epoch",
            "Val partial F1",
            "Val strict F1",
        ],
        &rows,
    );
    text.push_str(&format!(
        "{} configurations trained; selected learning rate {:e}, dropout {:.2}, {} epochs\n",
        outcome.trials.len(),
        outcome.best.learning_rate,
        outcome.best.dropout,
        outcome.best.epochs
    ));

    let report = match &test {
        Some(test) => {
            run.seeds = run.config.seeds.clone();
            let report = multi_seed(&outcome.best, &run.config.seeds, &train_val, test, &vocab)?;
            text.push('\n');
            text.push_str(&RunReport::f1_table(&[(&architecture(&outcome.best, false), &report)]));
            Some(report)
        }
        None => None,
    };
    print!("{text}");

    let best_config = ExperimentConfig {
        train: outcome.best.clone(),
        ..run.config.clone()
    };
    write_text(&best_config.to_toml()?, &out.join("best_config.toml"))?;
    write_json(&GridRecord { outcome, report }, &out.join("grid.json"))?;
    write_text(&text, &out.join("grid.txt"))?;
    run.outputs.push(out.to_path_buf());
    run.finish("grid-search", Some(sidecar_path(out, true)))
}

fn predict(mut run: Run, args: &PredictArgs) -> CliResult {
    let out = run.out("predict")?;
    run.input(&args.corpus);
    let corpus = load_jsonl(&args.corpus)?;
    let tagger = if let Some(model) = &args.model {
        run.input(model);
        load_model(model)?
    } else if let Some(store_path) = &args.emissions {
        run.input(store_path);
        if args.lowercase {
            run.config.corpus.lowercase = true;
        }
        let vocab = resolve_vocab(&mut run, args.vocab.as_ref(), &corpus)?;
        let crf = match &args.crf {
            Some(path) => {
                run.input(path);
                Some(CrfParams::load(path)?)
            }
            None => None,
        };
        Tagger {
            vocab,
            provider: EmissionProvider::FileBacked(EmissionStore::read(store_path)?),
            crf,
            max_len: args.max_len.unwrap_or(DEFAULT_MAX_LEN),
        }
    } else {
        return Err(CliError::Usage("predict needs --model or --emissions".into()));
    };
    let predictions = tagger.predict_corpus(&corpus, run.threads())?;
    write_predictions(&predictions, out)?;
    run.outputs.push(out.to_path_buf());
    let spans: usize = predictions.iter().map(|p| p.spans.len()).sum();
    println!(
        "wrote predictions for {} samples ({spans} spans) to {}",
        predictions.len(),
        out.display()
    );
    run.finish("predict", Some(sidecar_path(out, false)))
}

/// Pairs every gold sample with its prediction; any id present on only one
/// side is an error listing those ids.
fn align<'a>(
    gold: &'a Corpus,
    predictions: &'a [Prediction],
    source: &Path,
) -> Result<Vec<(&'a AnnotatedSample, &'a Prediction)>> {
    let mut by_id: HashMap<&str, &Prediction> = HashMap::with_capacity(predictions.len());
    let mut duplicates = BTreeSet::new();
    for p in predictions {
        if by_id.insert(p.id.as_str(), p).is_some() {
            duplicates.insert(p.id.as_str());
        }
    }
    let gold_ids: HashSet<&str> = gold.samples().iter().map(|s| s.id.as_str()).collect();
    let missing: BTreeSet<&str> = gold_ids.iter().copied().filter(|id| !by_id.contains_key(id)).collect();
    let extra: BTreeSet<&str> = by_id.keys().copied().filter(|id| !gold_ids.contains(id)).collect();
    if !missing.is_empty() || !extra.is_empty() || !duplicates.is_empty() {
        let list = |set: &BTreeSet<&str>| set.iter().copied().collect::<Vec<_>>().join(", ");
        let mut parts = Vec::new();
        if !missing.is_empty() {
            parts.push(format!("missing predictions for [{}]", list(&missing)));
        }
        if !extra.is_empty() {
            parts.push(format!("no gold sample for [{}]", list(&extra)));
        }
        if !duplicates.is_empty() {
            parts.push(format!("duplicate predictions for [{}]", list(&duplicates)));
        }
        return Err(Error::validation(source.display().to_string(), parts.join("; ")));
    }
    Ok(gold.samples().iter().map(|s| (s, by_id[s.id.as_str()])).collect())
}

/// Micro-averaged counts and scores under one matching mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MatchCounts {
    fn from_reports(reports: &[EntityMatchReport]) -> Self {
        let prf = corpus_f1(reports);
        Self {
            tp: reports.iter().map(|r| r.tp).sum(),
            fp: reports.iter().map(|r| r.fp).sum(),
            fn_: reports.iter().map(|r| r.fn_).sum(),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        }
    }
}

/// Machine-readable output of `evaluate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationRecord {
    pub samples: usize,
    pub strict: MatchCounts,
    pub partial: MatchCounts,
}

impl EvaluationRecord {
    pub fn table(&self) -> String {
        let row = |name: &str, m: &MatchCounts| {
            vec![
                name.to_string(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.fn_.to_string(),
                format!("{:.4}", m.precision),
                format!("{:.4}", m.recall),
                format!("{:.4}", m.f1),
            ]
        };
        render(
            &["Matching", "TP", "FP", "FN", "Precision", "Recall", "F1"],
            &[row("strict", &self.strict), row("partial", &self.partial)],
        )
    }
}

fn reports(pairs: &[(&AnnotatedSample, &Prediction)], mode: MatchMode) -> Vec<EntityMatchReport> {
    pairs
        .iter()
        .map(|(g, p)| match_entities(g.spans(), &p.spans, mode))
        .collect()
}

fn evaluate_cmd(mut run: Run, args: &EvaluateArgs) -> CliResult {
    run.input(&args.gold);
    run.input(&args.predictions);
    let gold = load_jsonl(&args.gold)?;
    let predictions = read_predictions(&args.predictions)?;
    let pairs = align(&gold, &predictions, &args.predictions)?;
    let record = EvaluationRecord {
        samples: pairs.len(),
        strict: MatchCounts::from_reports(&reports(&pairs, MatchMode::Strict)),
        partial: MatchCounts::from_reports(&reports(&pairs, MatchMode::Partial)),
    };
    print!("{}", record.table());
    let sidecar = match &run.cli.common.out {
        Some(out) => {
            write_json(&record, out)?;
            run.outputs.push(out.clone());
            Some(sidecar_path(out, false))
        }
        None => None,
    };
    run.finish("evaluate", sidecar)
}

/// Machine-readable output of `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRecord {
    pub system_a: String,
    pub system_b: String,
    /// Gold entities, the paired units of the McNemar test.
    pub entities: usize,
    pub strict_a: MatchCounts,
    pub strict_b: MatchCounts,
    pub mcnemar: McNemar,
    /// Per-sample strict F1 over samples with at least one gold entity.
    pub mann_whitney: Option<MannWhitney>,
}

fn method_name(method: TestMethod) -> &'static str {
    match method {
        TestMethod::Exact => "exact",
        TestMethod::Asymptotic => "asymptotic",
    }
}

fn system_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn compare(mut run: Run, args: &CompareArgs) -> CliResult {
    run.input(&args.gold);
    run.input(&args.system_a);
    run.input(&args.system_b);
    let gold = load_jsonl(&args.gold)?;
    let preds_a = read_predictions(&args.system_a)?;
    let preds_b = read_predictions(&args.system_b)?;
    let pairs_a = align(&gold, &preds_a, &args.system_a)?;
    let pairs_b = align(&gold, &preds_b, &args.system_b)?;
    let strict_a = reports(&pairs_a, MatchMode::Strict);
    let strict_b = reports(&pairs_b, MatchMode::Strict);
    let correct_a: Vec<bool> = strict_a
        .iter()
        .flat_map(|r| r.per_gold_matched.iter().copied())
        .collect();
    let correct_b: Vec<bool> = strict_b
        .iter()
        .flat_map(|r| r.per_gold_matched.iter().copied())
        .collect();
    let test = mcnemar(&correct_a, &correct_b)?;
    let mann_whitney = if args.mann_whitney {
        let per_sample = |reports: &[EntityMatchReport]| -> Vec<f64> {
            reports
                .iter()
                .filter(|r| !r.per_gold_matched.is_empty())
                .map(|r| r.f1)
                .collect()
        };
        Some(mann_whitney_u(&per_sample(&strict_a), &per_sample(&strict_b))?)
    } else {
        None
    };
    let record = CompareRecord {
        system_a: system_name(&args.system_a),
        system_b: system_name(&args.system_b),
        entities: correct_a.len(),
        strict_a: MatchCounts::from_reports(&strict_a),
        strict_b: MatchCounts::from_reports(&strict_b),
        mcnemar: test,
        mann_whitney,
    };

    let row = |name: &str, m: &MatchCounts| {
        vec![
            name.to_string(),
            format!("{:.4}", m.precision),
            format!("{:.4}", m.recall),
            format!("{:.4}", m.f1),
        ]
    };
    let mut text = render(
        &["System", "Strict P", "Strict R", "Strict F1"],
        &[
            row(&record.system_a, &record.strict_a),
            row(&record.system_b, &record.strict_b),
        ],
    );
    text.push_str(&format!(
        "McNemar over {} gold entities: b={} c={} p={} ({})\n",
        record.entities,
        test.b,
        test.c,
        p_value(test.p_value),
        method_name(test.method)
    ));
    if let Some(mw) = &record.mann_whitney {
        text.push_str(&format!(
            "Mann-Whitney U on per-sample strict F1: U={} p={} ({})\n",
            mw.u,
            p_value(mw.p_value),
            method_name(mw.method)
        ));
    }
    print!("{text}");
    let sidecar = match &run.cli.common.out {
        Some(out) => {
            write_json(&record, out)?;
            run.outputs.push(out.clone());
            Some(sidecar_path(out, false))
        }
        None => None,
    };
    run.finish("compare", sidecar)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemTextStats {
    pub system: String,
    /// Absent when the system predicted no entity with words.
    pub summary: Option<TextStatsSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTest {
    pub metric: String,
    pub result: MannWhitney,
}

/// Machine-readable output of `analyze`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextAnalysisRecord {
    pub systems: Vec<SystemTextStats>,
    /// Per-metric rank tests, present when exactly two systems were analyzed.
    pub mann_whitney: Vec<MetricTest>,
}

fn surfaces(predictions: &[Prediction], gold: Option<&Corpus>, source: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for p in predictions {
        if p.surfaces.len() == p.spans.len() {
            out.extend(p.surfaces.iter().cloned());
            continue;
        }
        let sample = gold.and_then(|g| g.get(&p.id)).ok_or_else(|| {
            Error::validation(
                source.display().to_string(),
                format!("prediction {:?} lacks surfaces and no gold text is available", p.id),
            )
        })?;
        out.extend(
            p.spans
                .iter()
                .map(|s| char_slice(&sample.text, s.start, s.end).to_string()),
        );
    }
    Ok(out)
}

fn analyze(mut run: Run, args: &AnalyzeArgs) -> CliResult {
    if let Some(path) = &args.familiar_words {
        run.config.analysis.familiar_words = Some(path.clone());
    }
    let familiar = match &run.config.analysis.familiar_words {
        Some(path) => {
            let path = path.clone();
            run.input(&path);
            FamiliarWords::load(&path)?
        }
        None => FamiliarWords::bundled(),
    };
    let metrics = TextMetrics::new(Some(familiar));
    let gold = match &args.gold {
        Some(path) => {
            run.input(path);
            Some(load_jsonl(path)?)
        }
        None => None,
    };
    let mut systems = Vec::new();
    for path in &args.predictions {
        run.input(path);
        let predictions = read_predictions(path)?;
        let texts = surfaces(&predictions, gold.as_ref(), path)?;
        systems.push(SystemTextStats {
            system: system_name(path),
            summary: prediction_text_stats(&texts, &metrics)?,
        });
    }
    let mut tests = Vec::new();
    if let [SystemTextStats { summary: Some(a), .. }, SystemTextStats { summary: Some(b), .. }] = systems.as_slice() {
        for (i, name) in TextStats::METRICS.iter().enumerate() {
            tests.push(MetricTest {
                metric: name.to_string(),
                result: mann_whitney_u(&a.column(i), &b.column(i))?,
            });
        }
    }
    let record = TextAnalysisRecord {
        systems,
        mann_whitney: tests,
    };
    print!("{}", analysis_table(&record));
    let sidecar = match &run.cli.common.out {
        Some(out) => {
            write_json(&record, out)?;
            run.outputs.push(out.clone());
            Some(sidecar_path(out, false))
        }
        None => None,
    };
    run.finish("analyze", sidecar)
}

fn analysis_table(record: &TextAnalysisRecord) -> String {
    let mut headers: Vec<String> = vec!["Metric".into()];
    headers.extend(record.systems.iter().map(|s| s.system.clone()));
    if !record.mann_whitney.is_empty() {
        headers.push("Mann-Whitney p".into());
    }
    let mut rows = Vec::new();
    for (i, name) in TextStats::METRICS.iter().enumerate() {
        let mut row = vec![name.to_string()];
        for system in &record.systems {
            row.push(match &system.summary {
                Some(summary) => {
                    let (_, ms) = summary.rows()[i];
                    format!("{:.2} ± {:.2}", ms.mean, ms.std)
                }
                None => "no data".into(),
            });
        }
        if let Some(test) = record.mann_whitney.get(i) {
            row.push(p_value(test.result.p_value));
        }
        rows.push(row);
    }
    let mut count_row = vec!["Entities".to_string()];
    count_row.extend(
        record
            .systems
            .iter()
            .map(|s| s.summary.as_ref().map_or(0, |x| x.count).to_string()),
    );
    if !record.mann_whitney.is_empty() {
        count_row.push(String::new());
    }
    rows.push(count_row);
    let header_refs: Vec<&str> = headers.iter().map(String::as_str).collect();
    render(&header_refs, &rows)
}
