//! Emission store: precomputed per-subword label log-probabilities keyed by
//! sample id.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! magic      8 bytes  "ADEEMIS\0"
//! version    u32      1
//! k          u32      3
//! count      u64
//! count x {
//!     id_len u32, id (UTF-8, id_len bytes)
//!     rows   u32      unmasked length: [CLS], content pieces, [SEP]
//!     rows * k f64    row-major log-probabilities
//! }
//! ```

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::crf::log_sum_exp;
use crate::error::{Error, Result};
use crate::labeling::Label;

pub const STORE_MAGIC: &[u8; 8] = b"ADEEMIS\0";
pub const STORE_VERSION: u32 = 1;
/// Accepted deviation of a row's log-sum-exp from zero.
pub const ROW_NORMALIZATION_TOLERANCE: f64 = 1e-6;

const K: usize = Label::COUNT;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EmissionStore {
    order: Vec<String>,
    entries: HashMap<String, Array2<f64>>,
}

impl EmissionStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.order
    }

    pub fn get(&self, id: &str) -> Option<&Array2<f64>> {
        self.entries.get(id)
    }

    /// Adds a matrix after checking shape, finiteness and row normalization.
    pub fn insert(&mut self, id: impl Into<String>, matrix: Array2<f64>) -> Result<()> {
        let id = id.into();
        validate_matrix(&id, &matrix)?;
        if self.entries.contains_key(&id) {
            return Err(Error::validation(
                format!("emission store entry {id:?}"),
                "duplicate id",
            ));
        }
        self.order.push(id.clone());
        self.entries.insert(id, matrix);
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(STORE_MAGIC);
        out.extend_from_slice(&STORE_VERSION.to_le_bytes());
        out.extend_from_slice(&(K as u32).to_le_bytes());
        out.extend_from_slice(&(self.order.len() as u64).to_le_bytes());
        for id in &self.order {
            let m = &self.entries[id];
            out.extend_from_slice(&(id.len() as u32).to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
            for v in m.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], source: &str) -> Result<Self> {
        let bad = |msg: String| Error::validation(source.to_string(), msg);
        let mut reader = ByteReader { bytes, pos: 0 };
        if reader.take(8).map_err(&bad)? != STORE_MAGIC {
            return Err(bad("not an emission store".into()));
        }
        let version = reader.u32().map_err(&bad)?;
        if version != STORE_VERSION {
            return Err(bad(format!("unsupported store version {version}")));
        }
        let k = reader.u32().map_err(&bad)?;
        if k as usize != K {
            return Err(bad(format!("store has {k} label columns, expected {K}")));
        }
        let count = reader.u64().map_err(&bad)?;
        let mut store = EmissionStore::new();
        for _ in 0..count {
            let id_len = reader.u32().map_err(&bad)? as usize;
            let id = std::str::from_utf8(reader.take(id_len).map_err(&bad)?)
                .map_err(|e| bad(format!("id is not UTF-8: {e}")))?
                .to_string();
            let rows = reader.u32().map_err(&bad)? as usize;
            let mut data = Vec::with_capacity(rows * K);
            for _ in 0..rows * K {
                data.push(reader.f64().map_err(&bad)?);
            }
            let matrix = Array2::from_shape_vec((rows, K), data).map_err(|e| bad(e.to_string()))?;
            store.insert(id, matrix)?;
        }
        if reader.pos != bytes.len() {
            return Err(bad("trailing bytes after last record".into()));
        }
        Ok(store)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    /// Reads and fully validates a store file.
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, &path.display().to_string())
    }
}

fn validate_matrix(id: &str, m: &Array2<f64>) -> Result<()> {
    let subject = || format!("emission store entry {id:?}");
    if m.ncols() != K || m.nrows() == 0 {
        return Err(Error::validation(
            subject(),
            format!("shape {:?}, expected (L >= 1, {K})", m.dim()),
        ));
    }
    for (t, row) in m.rows().into_iter().enumerate() {
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(subject(), format!("row {t} has a non-finite entry")));
        }
        let lse = log_sum_exp(row.iter().copied());
        if lse.abs() > ROW_NORMALIZATION_TOLERANCE {
            return Err(Error::validation(
                subject(),
                format!("row {t} is not log-normalized (log-sum-exp {lse:e})"),
            ));
        }
    }
    Ok(())
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let Some(end) = end else {
            return Err(format!("truncated at byte {}", self.pos));
        };
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> std::result::Result<f64, String> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn uniform(rows: usize) -> Array2<f64> {
        Array2::from_elem((rows, 3), -(3f64.ln()))
    }

    #[test]
    fn round_trip_preserves_order_and_bits() {
        let mut store = EmissionStore::new();
        store.insert("b", uniform(3)).unwrap();
        let skewed = array![[0.5f64.ln(), 0.25f64.ln(), 0.25f64.ln()]];
        store.insert("a", skewed).unwrap();
        let bytes = store.to_bytes();
        let back = EmissionStore::from_bytes(&bytes, "mem").unwrap();
        assert_eq!(back.ids(), ["b", "a"]);
        assert_eq!(back, store);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_unnormalized_rows() {
        let mut store = EmissionStore::new();
        let err = store.insert("x", array![[0.0, 0.0, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("log-normalized"));
    }

    #[test]
    fn rejects_duplicates_and_truncation() {
        let mut store = EmissionStore::new();
        store.insert("x", uniform(1)).unwrap();
        assert!(store.insert("x", uniform(1)).is_err());
        let bytes = store.to_bytes();
        assert!(EmissionStore::from_bytes(&bytes[..bytes.len() - 1], "mem").is_err());
        let mut wrong_k = bytes.clone();
        wrong_k[12] = 4;
        assert!(EmissionStore::from_bytes(&wrong_k, "mem").is_err());
    }
}
