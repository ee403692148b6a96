//! Brat-style standoff: `<doc>.txt` holds the text, `<doc>.ann` holds lines
//! `T<k>\t<TYPE> <start> <end>[;<start> <end>...]\t<surface>`.

use std::fs;
use std::path::{Path, PathBuf};

use super::{AnnotatedSample, CharSpan, Corpus};
use crate::error::{Error, Result};

pub fn read_standoff(path: &Path, label: &str) -> Result<Corpus> {
    let docs = collect_documents(path)?;
    let mut samples = Vec::with_capacity(docs.len());
    for txt in docs {
        let ann = txt.with_extension("ann");
        let text = fs::read_to_string(&txt).map_err(|e| Error::io(&txt, e))?;
        let spans = if ann.exists() {
            let body = fs::read_to_string(&ann).map_err(|e| Error::io(&ann, e))?;
            parse_annotations(&ann, &body, label)?
        } else {
            Vec::new()
        };
        let id = txt
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        samples.push(AnnotatedSample::new(id, text, spans)?.with_meta("source", "standoff"));
    }
    Corpus::new(samples)
}

/// A directory of documents, or a single `.txt`/`.ann` path.
fn collect_documents(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut docs: Vec<PathBuf> = fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|entry| entry.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|ext| ext == "txt"))
            .collect();
        docs.sort();
        Ok(docs)
    } else {
        let txt = path.with_extension("txt");
        if !txt.exists() {
            return Err(Error::io(
                &txt,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
            ));
        }
        Ok(vec![txt])
    }
}

fn parse_annotations(path: &Path, body: &str, label: &str) -> Result<Vec<CharSpan>> {
    let mut spans = Vec::new();
    for (idx, line) in body.lines().enumerate() {
        if !line.starts_with('T') {
            continue;
        }
        let mut fields = line.split('\t');
        let _tag = fields.next();
        let Some(header) = fields.next() else {
            return Err(Error::parse(path, idx + 1, "missing annotation header"));
        };
        let (kind, ranges) = header
            .split_once(' ')
            .ok_or_else(|| Error::parse(path, idx + 1, "missing offsets"))?;
        if kind != label {
            continue;
        }
        // discontinuous mentions become independent contiguous spans
        for range in ranges.split(';') {
            let mut bounds = range.split_whitespace();
            let (Some(start), Some(end), None) = (bounds.next(), bounds.next(), bounds.next()) else {
                return Err(Error::parse(path, idx + 1, format!("bad range {range:?}")));
            };
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::parse(path, idx + 1, format!("bad offset {s:?}")))
            };
            spans.push(CharSpan::new(parse(start)?, parse(end)?));
        }
    }
    Ok(spans)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discontinuous_fragments_split() {
        let body = "T1\tADR 0 4;10 14\tpain ache\nT2\tDrug 5 9\tdrug\n#1\tAnnotatorNotes T1\tnote\n";
        let spans = parse_annotations(Path::new("x.ann"), body, "ADR").unwrap();
        assert_eq!(spans, vec![CharSpan::new(0, 4), CharSpan::new(10, 14)]);
    }

    #[test]
    fn bad_offset_names_line() {
        let body = "T1\tADR 0 4\tx\nT2\tADR a 9\ty\n";
        let err = parse_annotations(Path::new("x.ann"), body, "ADR").unwrap_err();
        assert!(err.to_string().contains("x.ann:2"), "{err}");
    }
}
