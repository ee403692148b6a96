//! Annotated corpora: character-span ADE annotations over raw text, the three
//! on-disk formats they arrive in, and the train/validation split.
//!
//! All offsets count unicode scalar values (`char`s), never bytes.

mod jsonl;
mod standoff;
mod tsv;

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use jsonl::{read_jsonl, write_jsonl};

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub const fn new(start: usize, end: usize) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// True when the two spans share at least one character.
    pub fn overlaps(&self, other: &CharSpan) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<(usize, usize)> for CharSpan {
    fn from((start, end): (usize, usize)) -> Self {
        Self { start, end }
    }
}

impl From<CharSpan> for (usize, usize) {
    fn from(span: CharSpan) -> Self {
        (span.start, span.end)
    }
}

impl fmt::Display for CharSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {})", self.start, self.end)
    }
}

/// Number of unicode scalar values in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Slice `text` by character offsets. Out-of-range offsets are clamped.
pub fn char_slice(text: &str, start: usize, end: usize) -> &str {
    let mut indices = text.char_indices().map(|(i, _)| i).chain(std::iter::once(text.len()));
    let Some(lo) = indices.nth(start) else {
        return "";
    };
    let hi = if end <= start {
        lo
    } else {
        indices.nth(end - start - 1).unwrap_or(text.len())
    };
    &text[lo..hi]
}

/// Sort spans and merge any two that overlap or touch.
pub fn normalize_spans(spans: &[CharSpan]) -> Vec<CharSpan> {
    let mut sorted = spans.to_vec();
    sorted.sort();
    let mut out: Vec<CharSpan> = Vec::with_capacity(sorted.len());
    for span in sorted {
        match out.last_mut() {
            Some(last) if span.start <= last.end => last.end = last.end.max(span.end),
            _ => out.push(span),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "dev", alias = "validation")]
    Val,
    Test,
    #[default]
    Unlabeled,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::Unlabeled => "unlabeled",
        }
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" | "dev" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "unlabeled" | "" => Ok(Split::Unlabeled),
            other => Err(Error::argument(format!("unknown split tag {other:?}"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One text with its ADE mentions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotatedSample {
    pub id: String,
    pub text: String,
    spans: Vec<CharSpan>,
    pub split: Split,
    pub meta: BTreeMap<String, String>,
}

impl AnnotatedSample {
    /// Validates span bounds against `text` and normalizes the span list.
    pub fn new(id: impl Into<String>, text: impl Into<String>, spans: Vec<CharSpan>) -> Result<Self> {
        let id = id.into();
        let text = text.into();
        let len = char_len(&text);
        for span in &spans {
            if span.start >= span.end {
                return Err(Error::validation(
                    format!("sample {id:?}"),
                    format!("span {span} has start >= end"),
                ));
            }
            if span.end > len {
                return Err(Error::validation(
                    format!("sample {id:?}"),
                    format!("span {span} exceeds text length {len}"),
                ));
            }
        }
        Ok(Self {
            id,
            text,
            spans: normalize_spans(&spans),
            split: Split::Unlabeled,
            meta: BTreeMap::new(),
        })
    }

    pub fn with_split(mut self, split: Split) -> Self {
        self.split = split;
        self
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    /// Normalized gold spans (sorted, non-overlapping, non-touching).
    pub fn spans(&self) -> &[CharSpan] {
        &self.spans
    }

    pub fn is_positive(&self) -> bool {
        !self.spans.is_empty()
    }

    pub fn surface(&self, span: CharSpan) -> &str {
        char_slice(&self.text, span.start, span.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Corpus {
    samples: Vec<AnnotatedSample>,
}

impl Corpus {
    pub fn new(samples: Vec<AnnotatedSample>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(samples.len());
        for sample in &samples {
            if !seen.insert(sample.id.as_str()) {
                return Err(Error::validation(
                    format!("sample {:?}", sample.id),
                    "duplicate sample id",
                ));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[AnnotatedSample] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<AnnotatedSample> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&AnnotatedSample> {
        self.samples.iter().find(|s| s.id == id)
    }

    /// Samples carrying the given split tag, in corpus order.
    pub fn subset(&self, split: Split) -> Corpus {
        Corpus {
            samples: self.samples.iter().filter(|s| s.split == split).cloned().collect(),
        }
    }

    /// Concatenate two corpora, failing on id collisions.
    pub fn concat(&self, other: &Corpus) -> Result<Corpus> {
        let mut samples = self.samples.clone();
        samples.extend(other.samples.iter().cloned());
        Corpus::new(samples)
    }

    /// Retag every sample.
    pub fn with_split(mut self, split: Split) -> Corpus {
        for sample in &mut self.samples {
            sample.split = split;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Standoff,
    Tsv,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(CorpusFormat::Jsonl),
            "standoff" | "brat" => Ok(CorpusFormat::Standoff),
            "tsv" => Ok(CorpusFormat::Tsv),
            other => Err(Error::argument(format!("unknown corpus format {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    /// Annotation type kept by the standoff and TSV readers.
    pub label: String,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            label: "ADR".to_string(),
        }
    }
}

pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<Corpus> {
    load_corpus_with(path, format, &LoadOptions::default())
}

pub fn load_corpus_with(path: impl AsRef<Path>, format: CorpusFormat, options: &LoadOptions) -> Result<Corpus> {
    let path = path.as_ref();
    match format {
        CorpusFormat::Jsonl => read_jsonl(path),
        CorpusFormat::Standoff => standoff::read_standoff(path, &options.label),
        CorpusFormat::Tsv => tsv::read_tsv(path, &options.label),
    }
}

pub fn write_corpus(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    write_jsonl(corpus, path.as_ref())
}

/// Partition `corpus` into a first part of about `ratio` of the samples and
/// the remainder. With `stratify`, positives (≥1 span) and negatives are
/// split separately so both parts keep the class proportions.
///
/// Each stratum of size `n` contributes `round(ratio * n)` samples to the
/// first part, halves rounding toward the first part. Both parts keep corpus
/// order; the first part is tagged `train`, the second `val`.
pub fn split_corpus(corpus: &Corpus, ratio: f64, seed: u64, stratify: bool) -> Result<(Corpus, Corpus)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::argument(format!("split ratio {ratio} outside (0, 1)")));
    }
    if corpus.is_empty() {
        return Err(Error::argument("cannot split an empty corpus"));
    }

    let strata: Vec<Vec<usize>> = if stratify {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..corpus.len()).partition(|&i| corpus.samples[i].is_positive());
        vec![pos, neg]
    } else {
        vec![(0..corpus.len()).collect()]
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_first = vec![false; corpus.len()];
    for mut stratum in strata {
        let take = stratum_share(stratum.len(), ratio);
        stratum.shuffle(&mut rng);
        for &i in &stratum[..take] {
            in_first[i] = true;
        }
    }

    let mut first = Vec::new();
    let mut second = Vec::new();
    for (sample, keep) in corpus.samples.iter().zip(in_first) {
        if keep {
            first.push(sample.clone().with_split(Split::Train));
        } else {
            second.push(sample.clone().with_split(Split::Val));
        }
    }
    Ok((Corpus { samples: first }, Corpus { samples: second }))
}

fn stratum_share(n: usize, ratio: f64) -> usize {
    // f64::round rounds half away from zero, so exact halves go to the first part
    ((n as f64 * ratio).round() as usize).min(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spans(pairs: &[(usize, usize)]) -> Vec<CharSpan> {
        pairs.iter().map(|&p| p.into()).collect()
    }

    #[test]
    fn normalize_merges_overlap() {
        assert_eq!(normalize_spans(&spans(&[(5, 10), (8, 14)])), spans(&[(5, 14)]));
    }

    #[test]
    fn normalize_keeps_disjoint() {
        assert_eq!(
            normalize_spans(&spans(&[(12, 14), (5, 10)])),
            spans(&[(5, 10), (12, 14)])
        );
        assert!(normalize_spans(&[]).is_empty());
    }

    #[test]
    fn normalize_merges_touching() {
        assert_eq!(normalize_spans(&spans(&[(5, 10), (10, 14)])), spans(&[(5, 14)]));
    }

    #[test]
    fn char_slice_counts_scalar_values() {
        let text = "caf\u{e9} 😀 ok";
        assert_eq!(char_slice(text, 0, 4), "café");
        assert_eq!(char_slice(text, 5, 6), "😀");
        assert_eq!(char_slice(text, 7, 9), "ok");
        assert_eq!(char_slice(text, 7, 20), "ok");
        assert_eq!(char_slice(text, 30, 40), "");
    }

    #[test]
    fn sample_rejects_inverted_span() {
        let err = AnnotatedSample::new("x", "0123456789ab", spans(&[(10, 5)])).unwrap_err();
        assert!(matches!(err, Error::Validation { .. }));
    }

    #[test]
    fn sample_rejects_out_of_bounds() {
        let err = AnnotatedSample::new("x", "short", spans(&[(2, 9)])).unwrap_err();
        assert!(err.to_string().contains("\"x\""));
    }

    #[test]
    fn corpus_rejects_duplicate_ids() {
        let a = AnnotatedSample::new("a", "t", vec![]).unwrap();
        assert!(Corpus::new(vec![a.clone(), a]).is_err());
    }

    fn counts_corpus(pos: usize, neg: usize) -> Corpus {
        let samples = (0..pos + neg)
            .map(|i| {
                let spans = if i < pos { spans(&[(0, 1)]) } else { vec![] };
                AnnotatedSample::new(format!("s{i}"), "x y", spans).unwrap()
            })
            .collect();
        Corpus::new(samples).unwrap()
    }

    #[test]
    fn stratified_split_keeps_class_counts() {
        let corpus = counts_corpus(1300, 976);
        let (train, val) = split_corpus(&corpus, 0.8, 13, true).unwrap();
        let train_pos = train.samples().iter().filter(|s| s.is_positive()).count();
        assert_eq!(train_pos, 1040);
        // 976 * 0.8 = 780.8 rounds to 781
        assert_eq!(train.len() - train_pos, 781);
        assert_eq!(train.len() + val.len(), 2276);
        assert_eq!(val.len(), 455);
    }

    #[test]
    fn plain_split_sizes() {
        let corpus = counts_corpus(4, 6);
        let (a, b) = split_corpus(&corpus, 0.8, 0, false).unwrap();
        assert_eq!((a.len(), b.len()), (8, 2));
        assert!(a.samples().iter().all(|s| s.split == Split::Train));
        assert!(b.samples().iter().all(|s| s.split == Split::Val));
    }

    #[test]
    fn split_is_deterministic() {
        let corpus = counts_corpus(30, 20);
        let x = split_corpus(&corpus, 0.7, 99, true).unwrap();
        let y = split_corpus(&corpus, 0.7, 99, true).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn split_rejects_bad_ratio() {
        let corpus = counts_corpus(1, 1);
        assert!(split_corpus(&corpus, 0.0, 0, true).is_err());
        assert!(split_corpus(&corpus, 1.0, 0, true).is_err());
        assert!(split_corpus(&Corpus::default(), 0.5, 0, true).is_err());
    }
}
