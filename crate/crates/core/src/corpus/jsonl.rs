use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{AnnotatedSample, CharSpan, Corpus, Split};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    #[serde(default)]
    spans: Vec<CharSpan>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

pub fn read_jsonl(path: &Path) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: Record = serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        let split = match record.split.as_deref() {
            Some(tag) => tag
                .parse::<Split>()
                .map_err(|e| Error::parse(path, idx + 1, e.to_string()))?,
            None => Split::Unlabeled,
        };
        let mut sample = AnnotatedSample::new(record.id, record.text, record.spans)?.with_split(split);
        for (key, value) in record.meta {
            let value = match value {
                Value::String(s) => s,
                other => other.to_string(),
            };
            sample.meta.insert(key, value);
        }
        samples.push(sample);
    }
    Corpus::new(samples)
}

/// Canonical output: one record per line, keys in fixed order, split always present.
pub fn write_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for sample in corpus.samples() {
        let record = Record {
            id: sample.id.clone(),
            text: sample.text.clone(),
            spans: sample.spans().to_vec(),
            split: Some(sample.split.as_str().to_string()),
            meta: sample
                .meta
                .iter()
                .map(|(k, v)| (k.clone(), Value::String(v.clone())))
                .collect(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(body: &str) -> Result<Corpus> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        std::fs::write(&path, body).unwrap();
        read_jsonl(&path)
    }

    #[test]
    fn reads_optional_fields_and_meta() {
        let corpus = read(concat!(
            "{\"id\":\"a\",\"text\":\"rash\",\"spans\":[[0,4]],\"split\":\"dev\",\"meta\":{\"n\":3,\"src\":\"x\"}}\n",
            "\n",
            "{\"id\":\"b\",\"text\":\"fine\"}\n",
        ))
        .unwrap();
        let a = corpus.get("a").unwrap();
        assert_eq!(a.split, Split::Val);
        assert_eq!(a.meta["n"], "3");
        assert_eq!(a.meta["src"], "x");
        assert_eq!(corpus.get("b").unwrap().split, Split::Unlabeled);
    }

    #[test]
    fn errors_name_the_line() {
        let err = read("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\"}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = read("{\"id\":\"a\",\"text\":\"x\",\"split\":\"nope\"}\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));
        assert!(read("{\"id\":\"a\",\"text\":\"x\",\"other\":1}\n").is_err());
        assert!(read("{\"id\":\"a\",\"text\":\"x\",\"spans\":[[0,9]]}\n").is_err());
    }

    #[test]
    fn write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        let corpus = Corpus::new(vec![AnnotatedSample::new(
            "a",
            "caf\u{e9} rash",
            vec![CharSpan::new(5, 9)],
        )
        .unwrap()
        .with_split(Split::Test)
        .with_meta("k", "v")])
        .unwrap();
        write_jsonl(&corpus, &path).unwrap();
        let body = std::fs::read_to_string(&path).unwrap();
        assert!(body.starts_with("{\"id\":\"a\",\"text\""));
        assert_eq!(read_jsonl(&path).unwrap(), corpus);
    }
}
