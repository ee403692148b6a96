//! Seeded synthetic corpora for smoke tests, examples and benchmarks.
//!
//! Posts are drawn from carrier templates with a drug name and zero, one or
//! two mentions from a fixed lexicon of adverse-effect phrases.

use ndarray::Array2;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{char_len, AnnotatedSample, CharSpan, Corpus, Split};
use crate::error::Result;
use crate::labeling::{propagate_labels, spans_to_iob, split_words, Label};
use crate::tagger::EmissionStore;
use crate::tokenizer::{encode, Vocabulary};

pub const ADE_PHRASES: [&str; 40] = [
    "headache",
    "severe headache",
    "nausea",
    "constant nausea",
    "drowsiness",
    "dizziness",
    "insomnia",
    "dry mouth",
    "weight gain",
    "hair loss",
    "muscle cramps",
    "joint stiffness",
    "blurred vision",
    "skin rash",
    "itchy skin",
    "heart palpitations",
    "chest tightness",
    "night sweats",
    "restless legs",
    "stomach cramps",
    "brain fog",
    "memory problems",
    "tingling fingers",
    "numb feet",
    "ringing ears",
    "low libido",
    "vivid nightmares",
    "mood swings",
    "racing thoughts",
    "extreme fatigue",
    "shaky hands",
    "swollen ankles",
    "loss of appetite",
    "shortness of breath",
    "trouble concentrating",
    "jaw clenching",
    "hot flashes",
    "tremors",
    "constipation",
    "burning sensation in throat",
];

pub const DRUG_NAMES: [&str; 12] = [
    "lyrica", "cymbalta", "seroquel", "zoloft", "prozac", "humira", "lipitor", "vyvanse", "effexor", "paxil",
    "abilify", "tramadol",
];

const SINGLE_TEMPLATES: [&str; 10] = [
    "this {drug} gives me {ade} every morning",
    "day three on {drug} and the {ade} is back !",
    "{drug} made my {ade} so much worse",
    "cannot sleep because {drug} causes {ade}",
    "switched to {drug} and now i have {ade} lol",
    "anyone else get {ade} from {drug} ?",
    "the {ade} from {drug} is unreal today",
    "two weeks of {drug} , still dealing with {ade}",
    "{ade} kicked in an hour after my {drug} dose",
    "stopped {drug} because of the {ade} .",
];

const DOUBLE_TEMPLATES: [&str; 4] = [
    "{ade} and {ade2} since starting {drug}",
    "{drug} side effects : {ade} , {ade2}",
    "first {ade} then {ade2} , thanks {drug}",
    "on {drug} for a month , {ade} plus {ade2}",
];

const NEGATIVE_TEMPLATES: [&str; 8] = [
    "just picked up my {drug} refill",
    "{drug} is working well so far",
    "my doctor wants me to try {drug} next month",
    "does {drug} interact with coffee ?",
    "finally feeling normal on {drug}",
    "reading about {drug} before my appointment",
    "pharmacy was out of {drug} again",
    "{drug} has been a lifesaver for me",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    /// Fraction of posts without any mention.
    pub negative_rate: f64,
    /// Fraction of positive posts carrying two mentions.
    pub double_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            train: 500,
            val: 0,
            test: 100,
            negative_rate: 0.3,
            double_rate: 0.25,
            seed: 0,
        }
    }
}

/// Generates `train + val + test` posts with ids `syn-<split>-<n>`.
pub fn generate(config: &SyntheticConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut samples = Vec::with_capacity(config.train + config.val + config.test);
    for (split, count) in [
        (Split::Train, config.train),
        (Split::Val, config.val),
        (Split::Test, config.test),
    ] {
        for n in 0..count {
            let id = format!("syn-{}-{n:04}", split.as_str());
            samples.push(post(&mut rng, config, id).with_split(split));
        }
    }
    Corpus::new(samples).expect("synthetic ids are unique")
}

fn post(rng: &mut ChaCha8Rng, config: &SyntheticConfig, id: String) -> AnnotatedSample {
    let drug = *DRUG_NAMES.choose(rng).expect("non-empty");
    let template = if rng.random::<f64>() < config.negative_rate {
        *NEGATIVE_TEMPLATES.choose(rng).expect("non-empty")
    } else if rng.random::<f64>() < config.double_rate {
        *DOUBLE_TEMPLATES.choose(rng).expect("non-empty")
    } else {
        *SINGLE_TEMPLATES.choose(rng).expect("non-empty")
    };
    let first = *ADE_PHRASES.choose(rng).expect("non-empty");
    let second = loop {
        let candidate = *ADE_PHRASES.choose(rng).expect("non-empty");
        if candidate != first {
            break candidate;
        }
    };

    let mut text = String::new();
    let mut spans = Vec::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        text.push_str(&rest[..open]);
        let close = open + rest[open..].find('}').expect("balanced template");
        let slot = &rest[open + 1..close];
        let filler = match slot {
            "drug" => drug,
            "ade" => first,
            "ade2" => second,
            other => unreachable!("unknown slot {other}"),
        };
        if slot != "drug" {
            let start = char_len(&text);
            spans.push(CharSpan::new(start, start + char_len(filler)));
        }
        text.push_str(filler);
        rest = &rest[close + 1..];
    }
    text.push_str(rest);
    AnnotatedSample::new(id, text, spans).expect("template spans lie inside the text")
}

/// Shape of gold-derived emissions.
#[derive(Debug, Clone, PartialEq)]
pub struct FixtureNoise {
    /// Logit of the gold label; the others sit at zero.
    pub confidence: f64,
    /// Probability that an `I` piece following `B`/`I` is corrupted so that
    /// `O` wins by `margin` over `I`.
    pub corrupt_rate: f64,
    pub margin: f64,
    /// Half-width of uniform jitter added to every logit.
    pub jitter: f64,
}

impl FixtureNoise {
    pub fn clean() -> Self {
        Self {
            confidence: 4.0,
            corrupt_rate: 0.0,
            margin: 0.0,
            jitter: 0.0,
        }
    }

    /// Interior `I` pieces flipped towards `O` often enough that arg-max
    /// decoding breaks mentions apart.
    pub fn orphan_inside() -> Self {
        Self {
            confidence: 3.0,
            corrupt_rate: 0.35,
            margin: 0.5,
            jitter: 0.3,
        }
    }
}

/// Emission store built from gold labels, one log-softmax matrix per sample
/// covering `[CLS]`, the content pieces and `[SEP]`.
pub fn fixture_emissions(
    corpus: &Corpus,
    vocab: &Vocabulary,
    max_len: usize,
    noise: &FixtureNoise,
    seed: u64,
) -> Result<EmissionStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut store = EmissionStore::new();
    for sample in corpus.samples() {
        let words = split_words(&sample.text);
        let encoded = encode(&sample.id, &words, vocab, max_len);
        let word_labels = spans_to_iob(&words, sample.spans());
        let kept: Vec<Label> = encoded.word_alignment.iter().map(|&(w, _)| word_labels[w]).collect();
        let labels = propagate_labels(&kept, &encoded.pieces_per_word())?.labels;

        let mut logits = Array2::zeros((encoded.unmasked_len(), Label::COUNT));
        logits[[0, Label::O.index()]] = noise.confidence;
        logits[[encoded.unmasked_len() - 1, Label::O.index()]] = noise.confidence;
        for (t, &label) in labels.iter().enumerate() {
            let row = t + 1;
            let interior = label == Label::I && t > 0 && labels[t - 1] != Label::O;
            if interior && rng.random::<f64>() < noise.corrupt_rate {
                logits[[row, Label::I.index()]] = noise.confidence;
                logits[[row, Label::O.index()]] = noise.confidence + noise.margin;
            } else {
                logits[[row, label.index()]] = noise.confidence;
            }
        }
        if noise.jitter > 0.0 {
            logits.mapv_inplace(|v| v + rng.random_range(-noise.jitter..=noise.jitter));
        }
        crate::tagger::log_softmax_rows(&mut logits);
        store.insert(sample.id.clone(), logits)?;
    }
    Ok(store)
}
