use serde::{Deserialize, Serialize};

use crate::corpus::CharSpan;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// Exact `(start, end)` agreement.
    Strict,
    /// Any shared character counts as a full match.
    Partial,
}

/// Precision, recall and F1; each is 0 when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMatchReport {
    pub mode: MatchMode,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Whether each gold entity, in order, was matched.
    pub per_gold_matched: Vec<bool>,
}

impl EntityMatchReport {
    fn from_matches(mode: MatchMode, gold_matched: Vec<bool>, pred_count: usize) -> Self {
        let tp = gold_matched.iter().filter(|&&m| m).count();
        let fn_ = gold_matched.len() - tp;
        let fp = pred_count - tp;
        let Prf { precision, recall, f1 } = Prf::from_counts(tp, fp, fn_);
        Self {
            mode,
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
            per_gold_matched: gold_matched,
        }
    }

    pub fn prf(&self) -> Prf {
        Prf {
            precision: self.precision,
            recall: self.recall,
            f1: self.f1,
        }
    }
}

/// Score predicted spans against gold spans; both lists must be normalized.
///
/// Partial mode pairs golds and predictions one-to-one: golds are visited in
/// ascending start order and each takes the earliest unused overlapping
/// prediction.
pub fn match_entities(gold: &[CharSpan], pred: &[CharSpan], mode: MatchMode) -> EntityMatchReport {
    let gold_matched = match mode {
        MatchMode::Strict => gold.iter().map(|g| pred.binary_search(g).is_ok()).collect(),
        MatchMode::Partial => {
            let mut used = vec![false; pred.len()];
            gold.iter()
                .map(|g| {
                    let hit = pred
                        .iter()
                        .enumerate()
                        .find(|(j, p)| !used[*j] && p.overlaps(g))
                        .map(|(j, _)| j);
                    if let Some(j) = hit {
                        used[j] = true;
                    }
                    hit.is_some()
                })
                .collect()
        }
    };
    EntityMatchReport::from_matches(mode, gold_matched, pred.len())
}

/// Micro-average: pool tp/fp/fn over all samples, then compute P/R/F1.
pub fn corpus_f1<'a>(reports: impl IntoIterator<Item = &'a EntityMatchReport>) -> Prf {
    let (tp, fp, fn_) = reports
        .into_iter()
        .fold((0, 0, 0), |(tp, fp, fn_), r| (tp + r.tp, fp + r.fp, fn_ + r.fn_));
    Prf::from_counts(tp, fp, fn_)
}
