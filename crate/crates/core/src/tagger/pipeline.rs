use ndarray::{s, Array2};
use rayon::prelude::*;

use super::provider::{EmissionMode, EmissionProvider};
use crate::corpus::{char_slice, CharSpan, Corpus};
use crate::crf::{viterbi_decode, CrfParams, EmissionMatrix};
use crate::error::Result;
use crate::eval::Prediction;
use crate::labeling::{aggregate_labels, iob_to_spans, split_words, Label, LabelSequence, WordToken};
use crate::tokenizer::{encode, TokenizedSample, Vocabulary};

/// A predicted mention and the text it covers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Extraction {
    pub span: CharSpan,
    pub surface: String,
}

/// End-to-end extractor: words, subwords, emissions, decoding, aggregation
/// back to words, and character spans.
#[derive(Debug, Clone)]
pub struct Tagger {
    pub vocab: Vocabulary,
    pub provider: EmissionProvider,
    /// Without CRF parameters each row decodes to its arg-max label.
    pub crf: Option<CrfParams>,
    pub max_len: usize,
}

impl Tagger {
    pub fn encode(&self, id: &str, text: &str) -> (Vec<WordToken>, TokenizedSample) {
        let words = split_words(text);
        let encoded = encode(id, &words, &self.vocab, self.max_len);
        (words, encoded)
    }

    /// Word-level labels; words dropped by truncation are `O`.
    pub fn predict_word_labels(&self, id: &str, text: &str) -> Result<(Vec<WordToken>, LabelSequence)> {
        let (words, encoded) = self.encode(id, text);
        let emissions = if encoded.content_len() > 0 {
            Some(self.provider.emissions(&encoded, EmissionMode::Eval)?)
        } else {
            None
        };
        let labels = decode_word_labels(emissions.as_ref(), self.crf.as_ref(), &words, &encoded)?;
        Ok((words, labels))
    }

    pub fn predict(&self, id: &str, text: &str) -> Result<Vec<Extraction>> {
        let (words, labels) = self.predict_word_labels(id, text)?;
        Ok(iob_to_spans(&words, &labels)
            .into_iter()
            .map(|span| Extraction {
                span,
                surface: char_slice(text, span.start, span.end).to_string(),
            })
            .collect())
    }

    /// Predictions for every sample, in corpus order. `threads > 1` fans the
    /// samples out over a thread pool; output is identical either way.
    pub fn predict_corpus(&self, corpus: &Corpus, threads: usize) -> Result<Vec<Prediction>> {
        let run = |sample: &crate::corpus::AnnotatedSample| -> Result<Prediction> {
            let extractions = self.predict(&sample.id, &sample.text)?;
            Ok(Prediction {
                id: sample.id.clone(),
                spans: extractions.iter().map(|e| e.span).collect(),
                surfaces: extractions.into_iter().map(|e| e.surface).collect(),
            })
        };
        if threads <= 1 {
            return corpus.samples().iter().map(run).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| crate::Error::Config(e.to_string()))?;
        pool.install(|| corpus.samples().par_iter().map(run).collect())
    }
}

/// Decodes full-sequence emissions (including the `[CLS]` and `[SEP]` rows)
/// into word labels. `emissions` may be `None` only when there is no content.
pub(crate) fn decode_word_labels(
    emissions: Option<&EmissionMatrix>,
    crf: Option<&CrfParams>,
    words: &[WordToken],
    encoded: &TokenizedSample,
) -> Result<LabelSequence> {
    let mut labels = vec![Label::O; words.len()];
    if let Some(emissions) = emissions.filter(|_| encoded.content_len() > 0) {
        let content = content_rows(emissions, encoded.content_len());
        let subword = match crf {
            Some(params) => viterbi_decode(&EmissionMatrix::new(content)?, params).0.labels,
            None => argmax_rows(&content),
        };
        let aggregated = aggregate_labels(&subword, &encoded.pieces_per_word())?;
        for (&(word, _), &label) in encoded.word_alignment.iter().zip(aggregated.iter()) {
            labels[word] = label;
        }
    }
    Ok(LabelSequence::words(labels))
}

pub(crate) fn decode_spans(
    emissions: Option<&EmissionMatrix>,
    crf: Option<&CrfParams>,
    words: &[WordToken],
    encoded: &TokenizedSample,
) -> Result<Vec<CharSpan>> {
    let labels = decode_word_labels(emissions, crf, words, encoded)?;
    Ok(iob_to_spans(words, &labels))
}

/// Rows of the content pieces, skipping `[CLS]` and `[SEP]`.
pub(crate) fn content_rows(emissions: &EmissionMatrix, content_len: usize) -> Array2<f64> {
    emissions.scores().slice(s![1..=content_len, ..]).to_owned()
}

/// Row-wise arg-max; ties go to the lower label index.
pub fn argmax_rows(scores: &Array2<f64>) -> Vec<Label> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for k in 1..row.len() {
                if row[k] > row[best] {
                    best = k;
                }
            }
            Label::from_index(best).expect("three label columns")
        })
        .collect()
}
