//! Acceptance gate. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use adetag::corpus::{CharSpan, Split};
use adetag::crf::{log_partition, nll, nll_gradients, viterbi_decode, CrfParams, EmissionMatrix};
use adetag::eval::{
    mann_whitney_normal_p, mann_whitney_u, match_entities, mcnemar_from_counts, MatchMode, TestMethod, TextMetrics,
};
use adetag::labeling::{aggregate_labels, iob_to_spans, propagate_labels, spans_to_iob, split_words, Label};
use adetag::synthetic::{fixture_emissions, generate, FixtureNoise, SyntheticConfig};
use adetag::tagger::{
    emission_training_pairs, evaluate, grid_search, multi_seed, train, train_crf_posthoc, EmissionProvider,
    EncoderShape, GridSpec, RunReport, Tagger, ToyEncoder, TrainConfig,
};
use adetag::tokenizer::{corpus_vocab, wordpiece_tokenize, Vocabulary, DEFAULT_MAX_LEN};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let holds: bool = $cond;
        if !holds {
            return Err(format!($($msg)+));
        }
    };
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("crf partition oracle", crf_partition_oracle),
        ("viterbi oracle", viterbi_oracle),
        ("gradient checks", gradient_checks),
        ("labeling algebra", labeling_algebra),
        ("scorer fixtures", scorer_fixtures),
        ("statistics oracles", statistics_oracles),
        ("readability oracles", readability_oracles),
        ("desk-scale learnability", learnability),
        ("protocol fidelity", protocol_fidelity),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(message)
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.2}s]"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail} [{secs:.2}s]");
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

// ---- CRF oracles -----------------------------------------------------------

fn random_case(rng: &mut ChaCha8Rng, len: usize) -> (EmissionMatrix, CrfParams) {
    let mut draw = || rng.random_range(-2.0..2.0);
    let e = EmissionMatrix::new(Array2::from_shape_simple_fn((len, 3), &mut draw)).unwrap();
    let mut p = CrfParams::zeros(false);
    p.transitions = Array2::from_shape_simple_fn((3, 3), &mut draw);
    p.start = ndarray::Array1::from_shape_simple_fn(3, &mut draw);
    p.stop = ndarray::Array1::from_shape_simple_fn(3, &mut draw);
    (e, p)
}

/// Every label sequence of length `len`, in lexicographic `O < B < I` order.
fn all_paths(len: usize) -> Vec<Vec<Label>> {
    let total = 3usize.pow(len as u32);
    (0..total)
        .map(|mut code| {
            let mut path = vec![Label::O; len];
            for slot in path.iter_mut().rev() {
                *slot = Label::from_index(code % 3).unwrap();
                code /= 3;
            }
            path
        })
        .collect()
}

/// Path score summed as start, emissions left to right, transitions left to
/// right, stop.
fn path_score(e: &EmissionMatrix, p: &CrfParams, y: &[Label]) -> f64 {
    let s = e.scores();
    let mut score = p.start[y[0].index()];
    for (t, label) in y.iter().enumerate() {
        score += s[[t, label.index()]];
    }
    for pair in y.windows(2) {
        score += p.transitions[[pair[0].index(), pair[1].index()]];
    }
    score + p.stop[y[y.len() - 1].index()]
}

fn crf_partition_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let len = rng.random_range(1..=6);
        let (e, p) = random_case(&mut rng, len);
        let scores: Vec<f64> = all_paths(len).iter().map(|y| path_score(&e, &p, y)).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let brute = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
        let err = (log_partition(&e, &p) - brute).abs();
        worst = worst.max(err);
        ensure!(err < 1e-9, "case {case} (L={len}): |log Z - brute| = {err:e}");
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!("100 cases, max error {worst:.2e}"))
}

/// Brute-force best path. Ties go to lower labels, deciding from the last
/// position backwards, which is the order the decoder's backtracking follows.
fn brute_best(e: &EmissionMatrix, p: &CrfParams) -> (Vec<Label>, f64) {
    let mut best: Option<(Vec<Label>, f64)> = None;
    for y in all_paths(e.len()) {
        let score = path_score(e, p, &y);
        let better = match &best {
            None => true,
            Some((by, bs)) => {
                score > *bs
                    || (score == *bs && y.iter().rev().map(|l| l.index()).lt(by.iter().rev().map(|l| l.index())))
            }
        };
        if better {
            best = Some((y, score));
        }
    }
    best.unwrap()
}

fn viterbi_oracle() -> Check {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..200 {
        let len = rng.random_range(1..=6);
        let (e, p) = random_case(&mut rng, len);
        let (path, score) = viterbi_decode(&e, &p);
        let (best, best_score) = brute_best(&e, &p);
        ensure!(score == best_score, "case {case}: score {score} vs brute {best_score}");
        ensure!(
            path.labels == best,
            "case {case}: path {:?} vs brute {best:?}",
            path.labels
        );
    }
    // integer-valued scores make exact ties common
    let mut ties = 0;
    for case in 0..100 {
        let len = rng.random_range(1..=6);
        let mut draw = || rng.random_range(-1i32..=1) as f64;
        let e = EmissionMatrix::new(Array2::from_shape_simple_fn((len, 3), &mut draw)).unwrap();
        let mut p = CrfParams::zeros(false);
        p.transitions = Array2::from_shape_simple_fn((3, 3), &mut draw);
        let (path, score) = viterbi_decode(&e, &p);
        let (best, best_score) = brute_best(&e, &p);
        let optimal = all_paths(len)
            .iter()
            .filter(|y| path_score(&e, &p, y) == best_score)
            .count();
        if optimal > 1 {
            ties += 1;
        }
        ensure!(
            score == best_score && path.labels == best,
            "tie case {case}: {:?} vs {best:?}",
            path.labels
        );
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(format!(
        "200 random cases exact, plus 100 integer cases ({ties} with tied optima)"
    ))
}

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

fn gradient_checks() -> Check {
    let started = Instant::now();
    let h = 1e-5;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut worst_crf: f64 = 0.0;
    for case in 0..50 {
        let len = rng.random_range(1..=6);
        let (e, p) = random_case(&mut rng, len);
        let y: Vec<Label> = (0..len)
            .map(|_| Label::from_index(rng.random_range(0..3)).unwrap())
            .collect();
        let (d_e, d_p) = nll_gradients(&e, &y, &p).unwrap();
        let base = e.clone().into_inner();
        for t in 0..len {
            for k in 0..3 {
                let shifted = |delta: f64| {
                    let mut m = base.clone();
                    m[[t, k]] += delta;
                    nll(&EmissionMatrix::new(m).unwrap(), &y, &p).unwrap()
                };
                let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
                let err = relative_error(d_e[[t, k]], numeric);
                worst_crf = worst_crf.max(err);
                ensure!(err < 1e-4, "case {case}: emission ({t},{k}) rel error {err:e}");
            }
        }
        for block in 0..3 {
            for i in 0..p.blocks()[block].len() {
                let shifted = |delta: f64| {
                    let mut q = p.clone();
                    q.blocks_mut()[block][i] += delta;
                    nll(&e, &y, &q).unwrap()
                };
                let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
                let err = relative_error(d_p.blocks()[block][i], numeric);
                worst_crf = worst_crf.max(err);
                ensure!(err < 1e-4, "case {case}: crf block {block}[{i}] rel error {err:e}");
            }
        }
    }

    // micro-model: V=10, d=4, L<=5, loss = CRF NLL over its emission rows
    let shape = EncoderShape {
        vocab_size: 10,
        max_len: 5,
        d_model: 4,
        heads: 2,
        ff_dim: 8,
    };
    let mut worst_model: f64 = 0.0;
    let mut checked = 0;
    for case in 0..5 {
        let encoder = ToyEncoder::init(shape, &mut rng).unwrap();
        let crf = CrfParams::random(&mut rng, false);
        let len = rng.random_range(1..=5);
        let ids: Vec<u32> = (0..len).map(|_| rng.random_range(0..10)).collect();
        let y: Vec<Label> = (0..len)
            .map(|_| Label::from_index(rng.random_range(0..3)).unwrap())
            .collect();
        let loss = |enc: &ToyEncoder| {
            let lp = enc.log_probs(&ids).unwrap();
            nll(&EmissionMatrix::new(lp).unwrap(), &y, &crf).unwrap()
        };
        let cache = encoder.forward(&ids, None::<(f64, &mut ChaCha8Rng)>).unwrap();
        let (d_e, _) = nll_gradients(&EmissionMatrix::new(cache.log_probs.clone()).unwrap(), &y, &crf).unwrap();
        let grads = encoder.backward(&ids, &cache, d_e.view());
        let analytic: Vec<Vec<f64>> = grads.blocks().iter().map(|b| b.to_vec()).collect();
        for (block, values) in analytic.iter().enumerate() {
            for (i, &a) in values.iter().enumerate() {
                let shifted = |delta: f64| {
                    let mut enc = encoder.clone();
                    enc.params.blocks_mut()[block][i] += delta;
                    loss(&enc)
                };
                let numeric = (shifted(h) - shifted(-h)) / (2.0 * h);
                let err = relative_error(a, numeric);
                worst_model = worst_model.max(err);
                checked += 1;
                ensure!(
                    err < 1e-3,
                    "micro-model {case}: block {block}[{i}] analytic {a:e} numeric {numeric:e}"
                );
            }
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!(
        "CRF 50 cases max rel {worst_crf:.1e}; toy model {checked} parameters max rel {worst_model:.1e}"
    ))
}

// ---- labeling --------------------------------------------------------------

fn labeling_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for case in 0..10_000 {
        let words = rng.random_range(1..=12);
        let labels: Vec<Label> = (0..words)
            .map(|_| Label::from_index(rng.random_range(0..3)).unwrap())
            .collect();
        let counts: Vec<usize> = (0..words).map(|_| rng.random_range(1..=4)).collect();
        let pieces = propagate_labels(&labels, &counts).unwrap();
        let back = aggregate_labels(&pieces, &counts).unwrap();
        ensure!(back.labels == labels, "case {case}: {labels:?} -> {:?}", back.labels);
    }

    for case in 0..1000 {
        let n = rng.random_range(1..=15);
        let words: Vec<String> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=7);
                (0..len).map(|_| rng.random_range(b'a'..=b'z') as char).collect()
            })
            .collect();
        let text = words.join(" ");
        let tokens = split_words(&text);
        ensure!(tokens.len() == n, "case {case}: word split changed");
        let mut spans = Vec::new();
        let mut i = 0;
        while i < n {
            if rng.random_bool(0.3) {
                let j = rng.random_range(i..n.min(i + 4));
                spans.push(CharSpan::new(tokens[i].start, tokens[j].end));
                i = j + 1;
            } else {
                i += 1;
            }
        }
        let labels = spans_to_iob(&tokens, &spans);
        let back = iob_to_spans(&tokens, &labels);
        ensure!(back == spans, "case {case}: {spans:?} -> {back:?}");
    }

    let text = "I had heightened anxiety levels, generaly feeling unwell.";
    let words = split_words(text);
    let labels = spans_to_iob(&words, &[CharSpan::new(6, 31)]);
    use Label::{B, I, O};
    ensure!(
        labels.labels == [O, O, B, I, I, O, O, O, O, O],
        "sentence labels {:?}",
        labels.labels
    );
    ensure!(
        words[2..5].iter().map(|w| w.text.as_str()).collect::<Vec<_>>() == ["heightened", "anxiety", "levels"],
        "words {words:?}"
    );

    let vocab = Vocabulary::fixture(["heigh", "anxiety", "levels"], ["##ten", "##ed"]);
    ensure!(
        !vocab.contains("heightened"),
        "fixture vocabulary must not hold the whole word"
    );
    let pieces = wordpiece_tokenize("heightened", &vocab);
    ensure!(pieces == ["heigh", "##ten", "##ed"], "heightened -> {pieces:?}");
    Ok("10000 aggregate/propagate, 1000 span round trips, example sentence and wordpiece split".into())
}

// ---- scoring ---------------------------------------------------------------

fn spans(pairs: &[(usize, usize)]) -> Vec<CharSpan> {
    pairs.iter().map(|&(s, e)| CharSpan::new(s, e)).collect()
}

fn scorer_fixtures() -> Check {
    struct Fixture {
        name: &'static str,
        gold: Vec<CharSpan>,
        pred: Vec<CharSpan>,
        strict: (usize, usize, usize),
        partial: (usize, usize, usize),
    }
    let fixtures = vec![
        Fixture {
            name: "exact match",
            gold: spans(&[(0, 5), (10, 20)]),
            pred: spans(&[(0, 5), (10, 20)]),
            strict: (2, 0, 0),
            partial: (2, 0, 0),
        },
        Fixture {
            name: "overlap only",
            gold: spans(&[(6, 31)]),
            pred: spans(&[(17, 31)]),
            strict: (0, 1, 1),
            partial: (1, 0, 0),
        },
        Fixture {
            name: "adjacent, not overlapping",
            gold: spans(&[(0, 5)]),
            pred: spans(&[(5, 9)]),
            strict: (0, 1, 1),
            partial: (0, 1, 1),
        },
        Fixture {
            name: "one prediction over two golds",
            gold: spans(&[(0, 4), (6, 10)]),
            pred: spans(&[(2, 8)]),
            strict: (0, 1, 2),
            partial: (1, 0, 1),
        },
        Fixture {
            name: "two predictions inside one gold",
            gold: spans(&[(0, 20)]),
            pred: spans(&[(1, 5), (8, 12)]),
            strict: (0, 2, 1),
            partial: (1, 1, 0),
        },
        Fixture {
            name: "no predictions",
            gold: spans(&[(3, 7)]),
            pred: vec![],
            strict: (0, 0, 1),
            partial: (0, 0, 1),
        },
        Fixture {
            name: "no gold",
            gold: vec![],
            pred: spans(&[(3, 7)]),
            strict: (0, 1, 0),
            partial: (0, 1, 0),
        },
        Fixture {
            name: "mixed",
            gold: spans(&[(0, 3), (5, 9), (12, 15)]),
            pred: spans(&[(0, 3), (6, 9), (20, 22)]),
            strict: (1, 2, 2),
            partial: (2, 1, 1),
        },
    ];
    let prf = |(tp, fp, fn_): (usize, usize, usize)| {
        let p = if tp + fp == 0 {
            0.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let r = if tp + fn_ == 0 {
            0.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let f = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
        (p, r, f)
    };
    for f in &fixtures {
        for (mode, expected) in [(MatchMode::Strict, f.strict), (MatchMode::Partial, f.partial)] {
            let report = match_entities(&f.gold, &f.pred, mode);
            ensure!(
                (report.tp, report.fp, report.fn_) == expected,
                "{} {mode:?}: got ({}, {}, {}) expected {expected:?}",
                f.name,
                report.tp,
                report.fp,
                report.fn_
            );
            let (p, r, f1) = prf(expected);
            ensure!(
                report.precision == p && report.recall == r && report.f1 == f1,
                "{} {mode:?}: P/R/F1 mismatch",
                f.name
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let random_spans = |rng: &mut ChaCha8Rng| {
        let n = rng.random_range(0..6);
        let raw: Vec<CharSpan> = (0..n)
            .map(|_| {
                let s = rng.random_range(0..60);
                CharSpan::new(s, s + rng.random_range(1..10))
            })
            .collect();
        adetag::corpus::normalize_spans(&raw)
    };
    for case in 0..1000 {
        let samples = rng.random_range(1..5);
        let mut strict = Vec::new();
        let mut partial = Vec::new();
        for _ in 0..samples {
            let gold = random_spans(&mut rng);
            let pred = random_spans(&mut rng);
            strict.push(match_entities(&gold, &pred, MatchMode::Strict));
            partial.push(match_entities(&gold, &pred, MatchMode::Partial));
        }
        let s = adetag::eval::corpus_f1(&strict).f1;
        let p = adetag::eval::corpus_f1(&partial).f1;
        ensure!(s <= p, "case {case}: strict {s} > partial {p}");
    }
    Ok(format!(
        "{} hand-counted fixtures, strict <= partial on 1000 random sets",
        fixtures.len()
    ))
}

// ---- statistics ------------------------------------------------------------

/// Exact two-sided Mann-Whitney p-value by enumerating every split of the
/// pooled ranks 1..=n+m (no ties).
fn permutation_p(n: usize, m: usize, u: f64) -> f64 {
    let total = n + m;
    let center = (n * m) as f64 / 2.0;
    let observed = (u - center).abs();
    let (mut extreme, mut count) = (0u64, 0u64);
    for mask in 0u32..(1 << total) {
        if mask.count_ones() as usize != n {
            continue;
        }
        count += 1;
        let rank_sum: usize = (0..total).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).sum();
        let u_perm = rank_sum as f64 - (n * (n + 1) / 2) as f64;
        if (u_perm - center).abs() >= observed - 1e-9 {
            extreme += 1;
        }
    }
    extreme as f64 / count as f64
}

fn statistics_oracles() -> Check {
    let m = mcnemar_from_counts(5, 15);
    let expected = 43400.0 / 1048576.0;
    ensure!(
        (m.p_value - expected).abs() < 1e-6,
        "McNemar p {} vs {expected}",
        m.p_value
    );
    ensure!(m.method == TestMethod::Exact, "McNemar b+c=20 should be exact");

    let mw = mann_whitney_u(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).map_err(|e| e.to_string())?;
    ensure!(mw.p_value == 0.1 && mw.u == 0.0, "MWU U={} p={}", mw.u, mw.p_value);

    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut worst: f64 = 0.0;
    for case in 0..50 {
        let n = rng.random_range(5..=8);
        let m = rng.random_range(5..=8);
        let shift = rng.random_range(0.0..1.5);
        let xs: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let ys: Vec<f64> = (0..m).map(|_| rng.random::<f64>() + shift).collect();
        let u = mann_whitney_u(&xs, &ys).map_err(|e| e.to_string())?.u;
        let exact = permutation_p(n, m, u);
        let approx = mann_whitney_normal_p(n as f64, m as f64, u, &vec![1; n + m]);
        let diff = (exact - approx).abs();
        worst = worst.max(diff);
        ensure!(
            diff < 0.02,
            "case {case} (n={n}, m={m}, U={u}): exact {exact} normal {approx}"
        );
    }
    Ok(format!(
        "McNemar p={:.6}, MWU exact p=0.1, normal approximation max deviation {worst:.4} over 50 cases",
        m.p_value
    ))
}

fn readability_oracles() -> Check {
    let stats = TextMetrics::bundled()
        .readability("The cat sat on the mat.")
        .map_err(|e| e.to_string())?
        .ok_or("no stats")?;
    // 6 words, 1 sentence, 6 syllables, 17 letters, no difficult words
    let flesch = 206.835 - 1.015 * 6.0 - 84.6 * 1.0;
    let ari = 4.71 * (17.0 / 6.0) + 0.5 * 6.0 - 21.43;
    let dale_chall = 0.1579 * 0.0 + 0.0496 * 6.0;
    for (name, got, want) in [
        ("Flesch", stats.flesch, flesch),
        ("ARI", stats.ari, ari),
        ("Dale-Chall", stats.dale_chall, dale_chall),
    ] {
        ensure!((got - want).abs() < 1e-3, "{name}: {got} vs {want}");
    }
    ensure!(
        (flesch - 116.145).abs() < 1e-9 && (ari + 5.085).abs() < 1e-3 && (dale_chall - 0.2976).abs() < 1e-9,
        "oracle arithmetic"
    );
    Ok(format!(
        "Flesch {:.3}, ARI {:.3}, Dale-Chall {:.4}",
        stats.flesch, stats.ari, stats.dale_chall
    ))
}

// ---- learnability and protocol -----------------------------------------------

fn learnability() -> Check {
    let started = Instant::now();
    let corpus = generate(&SyntheticConfig::default());
    let train_split = corpus.subset(Split::Train);
    let test = corpus.subset(Split::Test);
    ensure!(train_split.len() == 500 && test.len() == 100, "corpus sizes");
    let negatives = corpus.samples().iter().filter(|s| !s.is_positive()).count() as f64 / corpus.len() as f64;
    let vocab = corpus_vocab(&train_split, false);
    let config = TrainConfig {
        epochs: 50,
        threads: 1,
        ..Default::default()
    };
    let (tagger, _) = train(&corpus, &vocab, &config).map_err(|e| e.to_string())?;
    let scores = evaluate(&tagger, &test, 1).map_err(|e| e.to_string())?;
    let elapsed = started.elapsed();
    ensure!(
        scores.strict.f1 >= 0.90,
        "strict F1 {:.4} after 50 epochs",
        scores.strict.f1
    );
    ensure!(elapsed < Duration::from_secs(120), "training took {elapsed:?}");

    // noise fixture: interior I pieces pushed towards O
    let noisy = fixture_emissions(&corpus, &vocab, DEFAULT_MAX_LEN, &FixtureNoise::orphan_inside(), 3)
        .map_err(|e| e.to_string())?;
    let provider = EmissionProvider::FileBacked(noisy);
    let pairs = emission_training_pairs(&train_split, &vocab, &provider, DEFAULT_MAX_LEN).map_err(|e| e.to_string())?;
    let crf_config = TrainConfig {
        epochs: 20,
        learning_rate: 0.05,
        ..Default::default()
    };
    let crf = train_crf_posthoc(&pairs, &crf_config).map_err(|e| e.to_string())?;
    let mut with_crf = Tagger {
        vocab: vocab.clone(),
        provider,
        crf: Some(crf),
        max_len: DEFAULT_MAX_LEN,
    };
    let crf_scores = evaluate(&with_crf, &test, 1).map_err(|e| e.to_string())?;
    with_crf.crf = None;
    let argmax_scores = evaluate(&with_crf, &test, 1).map_err(|e| e.to_string())?;
    ensure!(
        crf_scores.strict.f1 >= argmax_scores.strict.f1,
        "noise fixture: CRF strict F1 {:.4} < arg-max {:.4}",
        crf_scores.strict.f1,
        argmax_scores.strict.f1
    );
    Ok(format!(
        "toy+CRF strict F1 {:.4} in {:.1}s ({:.0}% negatives); noise fixture strict F1 CRF {:.4} vs no CRF {:.4}",
        scores.strict.f1,
        elapsed.as_secs_f64(),
        negatives * 100.0,
        crf_scores.strict.f1,
        argmax_scores.strict.f1
    ))
}

fn protocol_fidelity() -> Check {
    let corpus = generate(&SyntheticConfig {
        train: 60,
        val: 30,
        test: 30,
        seed: 5,
        ..Default::default()
    });
    let train_split = corpus.subset(Split::Train);
    let val = corpus.subset(Split::Val);
    let test = corpus.subset(Split::Test);
    let vocab = corpus_vocab(&train_split.concat(&val).map_err(|e| e.to_string())?, false);
    let base = TrainConfig {
        epochs: 2,
        d_model: 8,
        heads: 2,
        ff_dim: 16,
        ..Default::default()
    };
    let grid = GridSpec::standard();
    let outcome = grid_search(&train_split, &val, &vocab, &grid, &base).map_err(|e| e.to_string())?;
    ensure!(
        outcome.trials.len() == 12,
        "{} configurations trained",
        outcome.trials.len()
    );
    let mut seen: Vec<(f64, f64)> = outcome.trials.iter().map(|t| (t.learning_rate, t.dropout)).collect();
    seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut expected = Vec::new();
    for lr in [5e-6, 5e-5, 5e-4] {
        for d in [0.15, 0.20, 0.25, 0.30] {
            expected.push((lr, d));
        }
    }
    ensure!(seen == expected, "grid points {seen:?}");

    let train_val = train_split.concat(&val).map_err(|e| e.to_string())?;
    let seeds = [1, 2, 3, 4, 5];
    let report = multi_seed(&outcome.best, &seeds, &train_val, &test, &vocab).map_err(|e| e.to_string())?;
    ensure!(report.runs.len() == 5, "{} seed runs", report.runs.len());
    let values: Vec<f64> = report.runs.iter().map(|r| r.scores.unwrap().strict.f1).collect();
    let mean = values.iter().sum::<f64>() / 5.0;
    let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
    let summary = report.metric("strict_f1").ok_or("strict_f1 missing")?;
    ensure!((summary.mean - mean).abs() < 1e-12, "mean {} vs {mean}", summary.mean);
    ensure!(
        summary.std.is_some_and(|s| (s - std).abs() < 1e-12),
        "std {:?} vs {std}",
        summary.std
    );

    let table = RunReport::f1_table(&[("toy+CRF", &report)]);
    let row = table.lines().nth(1).ok_or("table has no data row")?;
    let cells: Vec<&str> = row.split("  ").map(str::trim).filter(|c| !c.is_empty()).collect();
    ensure!(cells.len() == 3, "row {row:?}");
    for cell in &cells[1..] {
        let parts: Vec<&str> = cell.split(" ± ").collect();
        ensure!(
            parts.len() == 2
                && parts
                    .iter()
                    .all(|p| p.parse::<f64>().is_ok() && p.split('.').nth(1).map(str::len) == Some(1)),
            "cell {cell:?} is not mean ± std with one decimal"
        );
    }
    Ok(format!("12 configurations; 5 seeds -> {}", row.trim()))
}
