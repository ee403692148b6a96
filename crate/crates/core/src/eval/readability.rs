//! Readability indices and length statistics of extracted entity strings.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::stats::mean_std;
use crate::labeling::split_words;

const BUNDLED_FAMILIAR: &str = include_str!("../../data/dale_chall_familiar.txt");

/// Lowercase words that Dale-Chall treats as familiar.
#[derive(Debug, Clone)]
pub struct FamiliarWords(HashSet<String>);

impl FamiliarWords {
    /// The list shipped in `data/dale_chall_familiar.txt`.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_FAMILIAR)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::parse(&body))
    }

    fn parse(body: &str) -> Self {
        Self(
            body.lines()
                .map(|l| l.trim().to_lowercase())
                .filter(|l| !l.is_empty())
                .collect(),
        )
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TextStats {
    pub dale_chall: f64,
    pub ari: f64,
    pub flesch: f64,
    pub mean_syllables_per_word: f64,
    /// Total syllables in the text.
    pub syllable_count: f64,
    /// Characters in the text, surrounding whitespace excluded.
    pub char_length: f64,
}

impl TextStats {
    pub const METRICS: [&'static str; 6] = [
        "Dale Chall Readability",
        "Automated Readability",
        "Flesch Reading Ease",
        "Syllable Count",
        "Character Length",
        "Syllables per Word",
    ];

    /// Values in the order of [`TextStats::METRICS`].
    pub fn values(&self) -> [f64; 6] {
        [
            self.dale_chall,
            self.ari,
            self.flesch,
            self.syllable_count,
            self.char_length,
            self.mean_syllables_per_word,
        ]
    }
}

fn is_vowel(c: char) -> bool {
    matches!(c, 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Heuristic English syllable count: vowel groups, minus a silent final `e`
/// (one that follows a consonant other than `l`), at least 1.
pub fn syllable_count(word: &str) -> usize {
    let letters: Vec<char> = word
        .chars()
        .filter(|c| c.is_alphabetic())
        .flat_map(char::to_lowercase)
        .collect();
    if letters.is_empty() {
        return 1;
    }
    let mut groups = 0;
    let mut prev_vowel = false;
    for &c in &letters {
        let v = is_vowel(c);
        if v && !prev_vowel {
            groups += 1;
        }
        prev_vowel = v;
    }
    let n = letters.len();
    if n >= 2 && letters[n - 1] == 'e' {
        let before = letters[n - 2];
        if !is_vowel(before) && before != 'l' {
            groups -= 1;
        }
    }
    groups.max(1)
}

/// Maximal runs of `.`, `!` or `?`, plus a trailing unterminated sentence; at least 1.
fn sentence_count(text: &str) -> usize {
    let mut count = 0;
    let mut in_run = false;
    let mut content_after = false;
    for c in text.chars() {
        if matches!(c, '.' | '!' | '?') {
            if !in_run {
                count += 1;
            }
            in_run = true;
            content_after = false;
        } else {
            in_run = false;
            if c.is_alphanumeric() {
                content_after = true;
            }
        }
    }
    (count + usize::from(content_after)).max(1)
}

/// Scores texts; Dale-Chall needs a familiar-word list.
#[derive(Debug, Clone)]
pub struct TextMetrics {
    familiar: Option<FamiliarWords>,
}

impl TextMetrics {
    pub fn new(familiar: Option<FamiliarWords>) -> Self {
        Self { familiar }
    }

    pub fn bundled() -> Self {
        Self::new(Some(FamiliarWords::bundled()))
    }

    /// `None` when the text holds no words.
    pub fn readability(&self, text: &str) -> Result<Option<TextStats>> {
        let familiar = self
            .familiar
            .as_ref()
            .ok_or_else(|| Error::Config("familiar-word list unavailable for Dale-Chall".into()))?;
        let words: Vec<String> = split_words(text)
            .into_iter()
            .map(|w| w.text)
            .filter(|w| w.chars().any(char::is_alphanumeric))
            .collect();
        if words.is_empty() {
            return Ok(None);
        }
        let n_words = words.len() as f64;
        let n_sentences = sentence_count(text) as f64;
        let syllables: usize = words.iter().map(|w| syllable_count(w)).sum();
        let letters: usize = words
            .iter()
            .map(|w| w.chars().filter(|c| c.is_alphanumeric()).count())
            .sum();
        let difficult = words
            .iter()
            .filter(|w| w.chars().any(char::is_alphabetic) && !familiar.contains(&w.to_lowercase()))
            .count();

        let words_per_sentence = n_words / n_sentences;
        let syllables_per_word = syllables as f64 / n_words;
        let difficult_pct = 100.0 * difficult as f64 / n_words;
        let mut dale_chall = 0.1579 * difficult_pct + 0.0496 * words_per_sentence;
        if difficult_pct > 5.0 {
            dale_chall += 3.6365;
        }
        Ok(Some(TextStats {
            dale_chall,
            ari: 4.71 * (letters as f64 / n_words) + 0.5 * words_per_sentence - 21.43,
            flesch: 206.835 - 1.015 * words_per_sentence - 84.6 * syllables_per_word,
            mean_syllables_per_word: syllables_per_word,
            syllable_count: syllables as f64,
            char_length: text.trim().chars().count() as f64,
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

/// Per-metric mean and sample standard deviation over a set of entity strings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextStatsSummary {
    pub count: usize,
    pub dale_chall: MeanStd,
    pub ari: MeanStd,
    pub flesch: MeanStd,
    pub mean_syllables_per_word: MeanStd,
    pub syllable_count: MeanStd,
    pub char_length: MeanStd,
    /// Raw per-entity stats, kept for rank tests between systems.
    pub per_entity: Vec<TextStats>,
}

impl TextStatsSummary {
    pub fn rows(&self) -> [(&'static str, MeanStd); 6] {
        [
            (TextStats::METRICS[0], self.dale_chall),
            (TextStats::METRICS[1], self.ari),
            (TextStats::METRICS[2], self.flesch),
            (TextStats::METRICS[3], self.syllable_count),
            (TextStats::METRICS[4], self.char_length),
            (TextStats::METRICS[5], self.mean_syllables_per_word),
        ]
    }

    /// Values of metric `index` (see [`TextStats::METRICS`]) for every entity.
    pub fn column(&self, index: usize) -> Vec<f64> {
        self.per_entity.iter().map(|s| s.values()[index]).collect()
    }
}

/// Score every predicted entity string; `None` when no entity has words.
pub fn prediction_text_stats<S: AsRef<str>>(surfaces: &[S], metrics: &TextMetrics) -> Result<Option<TextStatsSummary>> {
    let mut per_entity = Vec::with_capacity(surfaces.len());
    for surface in surfaces {
        if let Some(stats) = metrics.readability(surface.as_ref())? {
            per_entity.push(stats);
        }
    }
    if per_entity.is_empty() {
        return Ok(None);
    }
    let summarize = |f: fn(&TextStats) -> f64| {
        let values: Vec<f64> = per_entity.iter().map(f).collect();
        let (mean, std) = mean_std(&values);
        MeanStd {
            mean,
            std: std.unwrap_or(0.0),
        }
    };
    Ok(Some(TextStatsSummary {
        count: per_entity.len(),
        dale_chall: summarize(|s| s.dale_chall),
        ari: summarize(|s| s.ari),
        flesch: summarize(|s| s.flesch),
        mean_syllables_per_word: summarize(|s| s.mean_syllables_per_word),
        syllable_count: summarize(|s| s.syllable_count),
        char_length: summarize(|s| s.char_length),
        per_entity,
    }))
}
