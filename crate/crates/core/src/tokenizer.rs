//! Greedy longest-match-first WordPiece tokenization and `[CLS] ... [SEP] [PAD]*`
//! framing with word alignment.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use log::warn;

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::labeling::{split_words, WordToken};

pub const DEFAULT_MAX_LEN: usize = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpecialTokens {
    pub cls: String,
    pub sep: String,
    pub pad: String,
    pub unk: String,
}

impl Default for SpecialTokens {
    fn default() -> Self {
        Self {
            cls: "[CLS]".into(),
            sep: "[SEP]".into(),
            pad: "[PAD]".into(),
            unk: "[UNK]".into(),
        }
    }
}

/// Token inventory; line index in the vocabulary file is the token id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    entries: Vec<String>,
    index: HashMap<String, u32>,
    specials: SpecialTokens,
    pub continuation_prefix: String,
    /// Lowercase words before matching (uncased vocabularies).
    pub lowercase: bool,
}

impl Vocabulary {
    pub fn new(entries: Vec<String>, specials: SpecialTokens) -> Result<Self> {
        let mut index = HashMap::with_capacity(entries.len());
        for (i, entry) in entries.iter().enumerate() {
            if index.insert(entry.clone(), i as u32).is_some() {
                return Err(Error::validation("vocabulary", format!("duplicate entry {entry:?}")));
            }
        }
        for special in [&specials.cls, &specials.sep, &specials.pad, &specials.unk] {
            if !index.contains_key(special) {
                return Err(Error::validation(
                    "vocabulary",
                    format!("missing special token {special}"),
                ));
            }
        }
        Ok(Self {
            entries,
            index,
            specials,
            continuation_prefix: "##".into(),
            lowercase: false,
        })
    }

    /// Builds a vocabulary holding the special tokens, every character of
    /// `words` both as a word start and as a continuation piece, the words
    /// themselves and any extra `pieces`. Any word over the same alphabet then
    /// tokenizes without `[UNK]`.
    pub fn fixture<'a>(words: impl IntoIterator<Item = &'a str>, pieces: impl IntoIterator<Item = &'a str>) -> Self {
        let specials = SpecialTokens::default();
        let words: Vec<&str> = words.into_iter().collect();
        let alphabet: BTreeSet<char> = words.iter().flat_map(|w| w.chars()).collect();
        let mut entries: Vec<String> = vec![
            specials.pad.clone(),
            specials.unk.clone(),
            specials.cls.clone(),
            specials.sep.clone(),
        ];
        let mut seen: std::collections::HashSet<String> = entries.iter().cloned().collect();
        let mut push = |s: String, entries: &mut Vec<String>| {
            if seen.insert(s.clone()) {
                entries.push(s);
            }
        };
        for c in &alphabet {
            push(c.to_string(), &mut entries);
            push(format!("##{c}"), &mut entries);
        }
        for w in words {
            push(w.to_string(), &mut entries);
        }
        for p in pieces {
            push(p.to_string(), &mut entries);
        }
        Self::new(entries, specials).expect("fixture vocabulary is well formed")
    }

    pub fn with_lowercase(mut self, lowercase: bool) -> Self {
        self.lowercase = lowercase;
        self
    }

    /// True when every character in `alphabet` is an entry on its own.
    pub fn covers_alphabet(&self, alphabet: &str) -> bool {
        alphabet
            .chars()
            .all(|c| self.index.contains_key(c.to_string().as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn specials(&self) -> &SpecialTokens {
        &self.specials
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.entries.get(id as usize).map(String::as_str)
    }

    pub fn entries(&self) -> &[String] {
        &self.entries
    }

    fn special_id(&self, token: &str) -> u32 {
        self.index[token]
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut body = self.entries.join("\n");
        body.push('\n');
        fs::write(path, body).map_err(|e| Error::io(path, e))
    }
}

/// Vocabulary covering every word in `corpus` (lowercased first when
/// `lowercase`). Words longer than nine
/// characters are left out whole so that they split into a five-character
/// prefix and three-character continuation pieces.
pub fn corpus_vocab(corpus: &Corpus, lowercase: bool) -> Vocabulary {
    let mut words = BTreeSet::new();
    let mut pieces = BTreeSet::new();
    for sample in corpus.samples() {
        for word in split_words(&sample.text) {
            let text = if lowercase { word.text.to_lowercase() } else { word.text };
            let chars: Vec<char> = text.chars().collect();
            if chars.len() <= 9 {
                words.insert(text);
            } else {
                words.insert(chars[..5].iter().collect::<String>());
                for chunk in chars[5..].chunks(3) {
                    pieces.insert(format!("##{}", chunk.iter().collect::<String>()));
                }
            }
        }
    }
    Vocabulary::fixture(words.iter().map(String::as_str), pieces.iter().map(String::as_str)).with_lowercase(lowercase)
}

/// Reads a vocabulary file: UTF-8, one token per line.
pub fn load_vocab(path: impl AsRef<Path>) -> Result<Vocabulary> {
    let path = path.as_ref();
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let entries: Vec<String> = body
        .lines()
        .map(|l| l.strip_suffix('\r').unwrap_or(l).to_string())
        .collect();
    Vocabulary::new(entries, SpecialTokens::default())
}

/// Greedy longest-match-first segmentation of one word. If any remainder has
/// no matching entry the whole word becomes `[UNK]`.
pub fn wordpiece_tokenize(word: &str, vocab: &Vocabulary) -> Vec<String> {
    let word = if vocab.lowercase {
        word.to_lowercase()
    } else {
        word.to_string()
    };
    let chars: Vec<char> = word.chars().collect();
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut candidate = String::new();
    while start < chars.len() {
        let mut end = chars.len();
        let mut found = None;
        while end > start {
            candidate.clear();
            if start > 0 {
                candidate.push_str(&vocab.continuation_prefix);
            }
            candidate.extend(&chars[start..end]);
            if vocab.contains(&candidate) {
                found = Some(candidate.clone());
                break;
            }
            end -= 1;
        }
        match found {
            Some(piece) => {
                pieces.push(piece);
                start = end;
            }
            None => return vec![vocab.specials.unk.clone()],
        }
    }
    pieces
}

/// One encoded sample, padded to a fixed length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenizedSample {
    /// Sample id, used to look up externally computed emissions.
    pub id: String,
    pub subwords: Vec<String>,
    pub ids: Vec<u32>,
    /// `(word index, piece count)` for every word that fit.
    pub word_alignment: Vec<(usize, usize)>,
    pub cls_position: usize,
    pub sep_position: usize,
    pub mask: Vec<bool>,
}

impl TokenizedSample {
    /// Unmasked length: `[CLS]`, the content pieces and `[SEP]`.
    pub fn unmasked_len(&self) -> usize {
        self.sep_position + 1
    }

    /// Number of content pieces between `[CLS]` and `[SEP]`.
    pub fn content_len(&self) -> usize {
        self.sep_position - 1
    }

    pub fn pieces_per_word(&self) -> Vec<usize> {
        self.word_alignment.iter().map(|&(_, n)| n).collect()
    }

    /// Ids of the unmasked positions.
    pub fn unmasked_ids(&self) -> &[u32] {
        &self.ids[..self.unmasked_len()]
    }
}

/// Frames `words` as `[CLS] pieces... [SEP] [PAD]...` with exactly `max_len`
/// positions. Words whose pieces would not fit are dropped from the end.
pub fn encode(id: &str, words: &[WordToken], vocab: &Vocabulary, max_len: usize) -> TokenizedSample {
    assert!(max_len >= 3, "max_len must leave room for [CLS], [SEP] and one piece");
    let budget = max_len - 2;
    let specials = vocab.specials();
    let mut subwords = vec![specials.cls.clone()];
    let mut word_alignment = Vec::with_capacity(words.len());
    for (i, word) in words.iter().enumerate() {
        let pieces = wordpiece_tokenize(&word.text, vocab);
        if subwords.len() - 1 + pieces.len() > budget {
            warn!(
                "sample {id:?}: truncated at word {i} of {} (max_len {max_len})",
                words.len()
            );
            break;
        }
        word_alignment.push((i, pieces.len()));
        subwords.extend(pieces);
    }
    let sep_position = subwords.len();
    subwords.push(specials.sep.clone());
    let mut mask = vec![true; subwords.len()];
    mask.resize(max_len, false);
    subwords.resize(max_len, specials.pad.clone());
    let ids = subwords
        .iter()
        .map(|t| vocab.id(t).unwrap_or_else(|| vocab.special_id(&specials.unk)))
        .collect();
    TokenizedSample {
        id: id.to_string(),
        subwords,
        ids,
        word_alignment,
        cls_position: 0,
        sep_position,
        mask,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labeling::split_words;

    fn heightened_vocab() -> Vocabulary {
        Vocabulary::fixture(
            ["I", "had", "anxiety", "levels", ",", "feeling", "unwell", "."],
            ["heigh", "##ten", "##ed", "general", "##y"],
        )
    }

    #[test]
    fn splits_heightened() {
        let vocab = heightened_vocab();
        assert!(!vocab.contains("heightened"));
        assert_eq!(wordpiece_tokenize("heightened", &vocab), ["heigh", "##ten", "##ed"]);
        assert_eq!(wordpiece_tokenize("anxiety", &vocab), ["anxiety"]);
    }

    #[test]
    fn unknown_character_maps_whole_word_to_unk() {
        let vocab = heightened_vocab();
        assert_eq!(wordpiece_tokenize("ξ", &vocab), ["[UNK]"]);
        assert_eq!(wordpiece_tokenize("aξ", &vocab), ["[UNK]"]);
    }

    #[test]
    fn lowercase_flag_applies_before_matching() {
        let vocab = Vocabulary::fixture(["pain"], []);
        assert_eq!(wordpiece_tokenize("PAIN", &vocab), ["[UNK]"]);
        let vocab = vocab.with_lowercase(true);
        assert_eq!(wordpiece_tokenize("PAIN", &vocab), ["pain"]);
    }

    #[test]
    fn framing_and_mask() {
        let words = split_words("ab c xy");
        let vocab = Vocabulary::fixture(["ab", "c", "x"], ["##y"]);
        let enc = encode("s", &words, &vocab, 8);
        assert_eq!(
            enc.subwords,
            ["[CLS]", "ab", "c", "x", "##y", "[SEP]", "[PAD]", "[PAD]"]
        );
        assert_eq!(enc.mask, [true, true, true, true, true, true, false, false]);
        assert_eq!(enc.word_alignment, [(0, 1), (1, 1), (2, 2)]);
        assert_eq!(enc.unmasked_len(), 6);
        assert_eq!(enc.content_len(), 4);
    }

    #[test]
    fn exact_fit_has_no_padding() {
        let vocab = Vocabulary::fixture(["a", "b"], []);
        let enc = encode("s", &split_words("a b a"), &vocab, 5);
        assert!(enc.mask.iter().all(|&m| m));
        assert_eq!(enc.subwords.last().unwrap(), "[SEP]");
    }

    #[test]
    fn overflow_truncates_whole_words() {
        let vocab = Vocabulary::fixture(["a", "b"], []);
        let enc = encode("s", &split_words("a b a b"), &vocab, 4);
        assert_eq!(enc.word_alignment, [(0, 1), (1, 1)]);
        assert_eq!(enc.subwords, ["[CLS]", "a", "b", "[SEP]"]);
    }

    #[test]
    fn example_sentence_alignment() {
        let vocab = heightened_vocab();
        let text = "I had heightened anxiety levels, generaly feeling unwell.";
        let words = split_words(text);
        let enc = encode("fig1", &words, &vocab, 32);
        assert_eq!(enc.word_alignment.len(), words.len());
        assert_eq!(enc.pieces_per_word().iter().sum::<usize>(), enc.content_len());
        assert_eq!(&enc.subwords[3..6], ["heigh", "##ten", "##ed"]);
    }

    #[test]
    fn load_vocab_validation() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("ok.txt");
        fs::write(&ok, "[PAD]\n[UNK]\n[CLS]\n[SEP]\na\n").unwrap();
        assert_eq!(load_vocab(&ok).unwrap().len(), 5);

        let missing = dir.path().join("missing.txt");
        fs::write(&missing, "[UNK]\n[CLS]\n[SEP]\na\n").unwrap();
        assert!(matches!(load_vocab(&missing), Err(Error::Validation { .. })));

        let dup = dir.path().join("dup.txt");
        fs::write(&dup, "[PAD]\n[UNK]\n[CLS]\n[SEP]\nabc\nabc\n").unwrap();
        assert!(load_vocab(&dup).unwrap_err().to_string().contains("abc"));
    }
}
