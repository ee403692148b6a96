//! Entity-level scoring of two systems against gold spans, with McNemar and
//! Mann-Whitney tests between them.
//!
//!     cargo run --example significance

use adetag::corpus::CharSpan;
use adetag::eval::{corpus_f1, mann_whitney_u, match_entities, mcnemar, MatchMode};

fn main() -> adetag::Result<()> {
    let span = |s, e| CharSpan::new(s, e);
    let gold = [
        vec![span(0, 8)],
        vec![span(4, 10), span(15, 20)],
        vec![span(2, 6)],
        vec![],
    ];
    let system_a = [vec![span(0, 8)], vec![span(4, 10)], vec![span(1, 6)], vec![span(0, 3)]];
    let system_b = [
        vec![span(0, 5)],
        vec![span(4, 10), span(15, 20)],
        vec![span(2, 6)],
        vec![],
    ];

    let mut strict = Vec::new();
    for (name, preds) in [("A", &system_a), ("B", &system_b)] {
        let reports: Vec<_> = gold
            .iter()
            .zip(preds)
            .map(|(g, p)| match_entities(g, p, MatchMode::Strict))
            .collect();
        let partial: Vec<_> = gold
            .iter()
            .zip(preds)
            .map(|(g, p)| match_entities(g, p, MatchMode::Partial))
            .collect();
        println!(
            "system {name}: strict F1 {:.3}  partial F1 {:.3}",
            corpus_f1(&reports).f1,
            corpus_f1(&partial).f1
        );
        strict.push(reports);
    }

    let correct = |reports: &[adetag::eval::EntityMatchReport]| -> Vec<bool> {
        reports
            .iter()
            .flat_map(|r| r.per_gold_matched.iter().copied())
            .collect()
    };
    let test = mcnemar(&correct(&strict[0]), &correct(&strict[1]))?;
    println!(
        "McNemar b={} c={} p={:.4} ({:?})",
        test.b, test.c, test.p_value, test.method
    );

    let per_sample = |reports: &[adetag::eval::EntityMatchReport]| -> Vec<f64> {
        reports
            .iter()
            .filter(|r| !r.per_gold_matched.is_empty())
            .map(|r| r.f1)
            .collect()
    };
    let mw = mann_whitney_u(&per_sample(&strict[0]), &per_sample(&strict[1]))?;
    println!("Mann-Whitney U={} p={:.4} ({:?})", mw.u, mw.p_value, mw.method);
    Ok(())
}
