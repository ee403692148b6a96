//! Entity-level scoring, significance tests and text statistics.

mod matching;
mod predictions;
mod readability;
mod stats;

pub use matching::{corpus_f1, match_entities, EntityMatchReport, MatchMode, Prf};
pub use predictions::{read_predictions, write_predictions, Prediction};
pub use readability::{
    prediction_text_stats, syllable_count, FamiliarWords, MeanStd, TextMetrics, TextStats, TextStatsSummary,
};
pub use stats::{
    mann_whitney_exact_p, mann_whitney_normal_p, mann_whitney_u, mcnemar, mcnemar_from_counts, mean_std, midranks,
    MannWhitney, McNemar, TestMethod, MANN_WHITNEY_EXACT_LIMIT, MCNEMAR_EXACT_LIMIT,
};
