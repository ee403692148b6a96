//! Conversions between character spans, word-level IOB labels and
//! subword-level IOB labels.

use std::fmt;
use std::ops::Deref;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_spans, CharSpan};
use crate::error::{Error, Result};

/// A word with its character offsets in the owning text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordToken {
    pub text: String,
    pub start: usize,
    pub end: usize,
}

impl WordToken {
    pub fn span(&self) -> CharSpan {
        CharSpan::new(self.start, self.end)
    }
}

/// IOB class. The discriminant is the label index used by emission matrices
/// and the CRF; decoding ties resolve toward the lower index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    O = 0,
    B = 1,
    I = 2,
}

impl Label {
    pub const ALL: [Label; 3] = [Label::O, Label::B, Label::I];
    pub const COUNT: usize = 3;

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Label> {
        Label::ALL.get(index).copied()
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::O => "O",
            Label::B => "B",
            Label::I => "I",
        })
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "O" => Ok(Label::O),
            "B" => Ok(Label::B),
            "I" => Ok(Label::I),
            other => Err(Error::argument(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    Word,
    Subword,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSequence {
    pub labels: Vec<Label>,
    pub granularity: Granularity,
}

impl LabelSequence {
    pub fn words(labels: Vec<Label>) -> Self {
        Self {
            labels,
            granularity: Granularity::Word,
        }
    }

    pub fn subwords(labels: Vec<Label>) -> Self {
        Self {
            labels,
            granularity: Granularity::Subword,
        }
    }
}

impl Deref for LabelSequence {
    type Target = [Label];

    fn deref(&self) -> &[Label] {
        &self.labels
    }
}

/// Whitespace segmentation, then every leading and trailing non-alphanumeric
/// character of a chunk becomes its own token.
pub fn split_words(text: &str) -> Vec<WordToken> {
    let chars: Vec<char> = text.chars().collect();
    let mut words = Vec::new();
    let mut pos = 0;
    while pos < chars.len() {
        if chars[pos].is_whitespace() {
            pos += 1;
            continue;
        }
        let chunk_start = pos;
        while pos < chars.len() && !chars[pos].is_whitespace() {
            pos += 1;
        }
        split_chunk(&chars, chunk_start, pos, &mut words);
    }
    words
}

fn split_chunk(chars: &[char], start: usize, end: usize, out: &mut Vec<WordToken>) {
    let token = |s: usize, e: usize| WordToken {
        text: chars[s..e].iter().collect(),
        start: s,
        end: e,
    };
    let mut lo = start;
    while lo < end && !chars[lo].is_alphanumeric() {
        out.push(token(lo, lo + 1));
        lo += 1;
    }
    if lo == end {
        return;
    }
    let mut hi = end;
    while !chars[hi - 1].is_alphanumeric() {
        hi -= 1;
    }
    out.push(token(lo, hi));
    for i in hi..end {
        out.push(token(i, i + 1));
    }
}

/// Word-level IOB labels for normalized `spans`. A word touching a span on at
/// least one character is inside the mention.
pub fn spans_to_iob(words: &[WordToken], spans: &[CharSpan]) -> LabelSequence {
    let mut labels = vec![Label::O; words.len()];
    let mut assigned = vec![false; words.len()];
    let mut cursor = 0;
    for span in spans {
        while cursor < words.len() && words[cursor].end <= span.start {
            cursor += 1;
        }
        let mut hit = false;
        let mut continuing = false;
        let mut j = cursor;
        while j < words.len() && words[j].start < span.end {
            if words[j].span().overlaps(span) {
                if !hit && assigned[j] {
                    // the word straddles the previous span; extend that mention
                    continuing = true;
                } else if !assigned[j] {
                    labels[j] = if hit || continuing { Label::I } else { Label::B };
                    assigned[j] = true;
                }
                hit = true;
            }
            j += 1;
        }
        if !hit {
            warn!("span {span} intersects no word; skipped");
        }
    }
    LabelSequence::words(labels)
}

/// Decode word labels into character spans. An `I` with no preceding `B`/`I`
/// opens a new mention. The result is normalized.
pub fn iob_to_spans(words: &[WordToken], labels: &[Label]) -> Vec<CharSpan> {
    debug_assert_eq!(words.len(), labels.len());
    let mut spans = Vec::new();
    let mut open: Option<CharSpan> = None;
    for (word, &label) in words.iter().zip(labels) {
        match (label, open.as_mut()) {
            (Label::O, _) => spans.extend(open.take()),
            (Label::I, Some(current)) => current.end = word.end,
            (Label::B, _) | (Label::I, None) => {
                spans.extend(open.take());
                open = Some(word.span());
            }
        }
    }
    spans.extend(open);
    normalize_spans(&spans)
}

/// Spread word labels over subword pieces: `B` becomes `[B, I, ..., I]`, while
/// `I` and `O` repeat.
pub fn propagate_labels(word_labels: &[Label], pieces_per_word: &[usize]) -> Result<LabelSequence> {
    if word_labels.len() != pieces_per_word.len() {
        return Err(Error::argument(format!(
            "{} word labels but {} piece counts",
            word_labels.len(),
            pieces_per_word.len()
        )));
    }
    let mut out = Vec::with_capacity(pieces_per_word.iter().sum());
    for (&label, &count) in word_labels.iter().zip(pieces_per_word) {
        if count == 0 {
            return Err(Error::argument("piece count must be positive"));
        }
        let tail = if label == Label::B { Label::I } else { label };
        out.push(label);
        out.extend(std::iter::repeat_n(tail, count - 1));
    }
    Ok(LabelSequence::subwords(out))
}

/// Collapse each word's subword labels with the first rule that applies:
/// all `O` gives `O`, any `B` gives `B`, any `I` gives `I`.
pub fn aggregate_labels(subword_labels: &[Label], pieces_per_word: &[usize]) -> Result<LabelSequence> {
    let total: usize = pieces_per_word.iter().sum();
    if total != subword_labels.len() {
        return Err(Error::argument(format!(
            "piece counts sum to {total} but {} subword labels given",
            subword_labels.len()
        )));
    }
    let mut out = Vec::with_capacity(pieces_per_word.len());
    let mut offset = 0;
    for &count in pieces_per_word {
        if count == 0 {
            return Err(Error::argument("piece count must be positive"));
        }
        out.push(aggregate_group(&subword_labels[offset..offset + count]));
        offset += count;
    }
    Ok(LabelSequence::words(out))
}

fn aggregate_group(group: &[Label]) -> Label {
    if group.iter().all(|&l| l == Label::O) {
        Label::O
    } else if group.contains(&Label::B) {
        Label::B
    } else {
        Label::I
    }
}
