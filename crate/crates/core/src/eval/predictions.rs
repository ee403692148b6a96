use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::{normalize_spans, CharSpan};
use crate::error::{Error, Result};

/// One line of a predictions file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Prediction {
    pub id: String,
    pub spans: Vec<CharSpan>,
    /// Text of each span; may be left empty when the gold text is at hand.
    #[serde(default)]
    pub surfaces: Vec<String>,
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<Prediction>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut pred: Prediction =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, e.to_string()))?;
        if !pred.surfaces.is_empty() && pred.spans.len() != pred.surfaces.len() {
            return Err(Error::parse(path, idx + 1, "spans and surfaces differ in length"));
        }
        if pred.spans.iter().any(|s| s.start >= s.end) {
            return Err(Error::parse(path, idx + 1, "span with start >= end"));
        }
        let normalized = normalize_spans(&pred.spans);
        if normalized != pred.spans {
            // surfaces no longer line up with merged spans; keep spans authoritative
            pred.surfaces.clear();
            pred.spans = normalized;
        }
        out.push(pred);
    }
    Ok(out)
}

pub fn write_predictions(predictions: &[Prediction], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for pred in predictions {
        serde_json::to_writer(&mut out, pred)?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
