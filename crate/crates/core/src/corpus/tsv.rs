//! Tab-separated rows `id, begin, end, type, extraction, text`, one row per
//! mention. Rows with empty `begin`/`end` mark negative samples.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::{AnnotatedSample, CharSpan, Corpus};
use crate::error::{Error, Result};

pub fn read_tsv(path: &Path, label: &str) -> Result<Corpus> {
    let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut order: Vec<String> = Vec::new();
    let mut docs: HashMap<String, (String, Vec<CharSpan>)> = HashMap::new();

    for (idx, line) in body.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if idx == 0 && cols.first().is_some_and(|c| c.eq_ignore_ascii_case("id")) {
            continue;
        }
        if cols.len() != 6 {
            return Err(Error::parse(
                path,
                lineno,
                format!("expected 6 columns, found {}", cols.len()),
            ));
        }
        let (id, begin, end, kind, text) = (cols[0], cols[1].trim(), cols[2].trim(), cols[3], cols[5]);

        let entry = docs.entry(id.to_string()).or_insert_with(|| {
            order.push(id.to_string());
            (text.to_string(), Vec::new())
        });
        if entry.0 != text {
            return Err(Error::parse(
                path,
                lineno,
                format!("text differs from earlier rows of {id:?}"),
            ));
        }
        if begin.is_empty() && end.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<usize>()
                .map_err(|_| Error::parse(path, lineno, format!("bad offset {s:?}")))
        };
        let span = CharSpan::new(parse(begin)?, parse(end)?);
        if kind == label {
            entry.1.push(span);
        }
    }

    let samples = order
        .into_iter()
        .map(|id| {
            let (text, spans) = docs.remove(&id).expect("id recorded on insert");
            AnnotatedSample::new(id, text, spans).map(|s| s.with_meta("source", "tsv"))
        })
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(body: &str) -> Result<Corpus> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        std::fs::write(&path, body).unwrap();
        read_tsv(&path, "ADR")
    }

    #[test]
    fn groups_rows_by_id_in_first_seen_order() {
        let corpus = read(
            "b\t0\t4\tADR\tpain\tpain and rash\n\
             a\t\t\t\t\tall good\n\
             b\t9\t13\tADR\trash\tpain and rash\n",
        )
        .unwrap();
        let ids: Vec<&str> = corpus.samples().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["b", "a"]);
        assert_eq!(corpus.get("b").unwrap().spans().len(), 2);
        assert_eq!(corpus.get("a").unwrap().meta["source"], "tsv");
    }

    #[test]
    fn malformed_rows() {
        assert!(matches!(
            read("a\t0\t4\tADR\tpain\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            read("a\tx\t4\tADR\tpain\tpain\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        let err = read("a\t0\t4\tADR\tpain\tpain\na\t0\t4\tADR\tpain\tother\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
