//! Linear-chain CRF over the three IOB classes.
//!
//! A path `y` over an `L x 3` emission matrix `e` scores
//! `start[y0] + sum_t e[t, y_t] + sum_t trans[y_t, y_t+1] + stop[y_L-1]`.
//! Every dynamic program runs in log space.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::{Label, LabelSequence};

const K: usize = Label::COUNT;

/// Per-position label scores (log-probabilities or raw logits), one row per
/// subword.
#[derive(Debug, Clone, PartialEq)]
pub struct EmissionMatrix(Array2<f64>);

impl EmissionMatrix {
    pub fn new(scores: Array2<f64>) -> Result<Self> {
        if scores.ncols() != K {
            return Err(Error::validation(
                "emission matrix",
                format!("expected {K} columns, found {}", scores.ncols()),
            ));
        }
        if scores.nrows() == 0 {
            return Err(Error::validation("emission matrix", "no rows"));
        }
        if scores.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("emission matrix", "non-finite entry"));
        }
        Ok(Self(scores))
    }

    pub fn from_rows(rows: &[[f64; K]]) -> Result<Self> {
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let scores = Array2::from_shape_vec((rows.len(), K), flat)
            .map_err(|e| Error::validation("emission matrix", e.to_string()))?;
        Self::new(scores)
    }

    pub fn len(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.nrows() == 0
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.0
    }
}

/// Transition, start and stop scores. With `constrained` set, the IOB-invalid
/// moves `O -> I` and `start -> I` score negative infinity regardless of the
/// stored values.
#[derive(Debug, Clone, PartialEq)]
pub struct CrfParams {
    pub transitions: Array2<f64>,
    pub start: Array1<f64>,
    pub stop: Array1<f64>,
    pub constrained: bool,
}

impl CrfParams {
    pub fn zeros(constrained: bool) -> Self {
        Self {
            transitions: Array2::zeros((K, K)),
            start: Array1::zeros(K),
            stop: Array1::zeros(K),
            constrained,
        }
    }

    /// Entries drawn from `uniform(-0.1, 0.1)`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, constrained: bool) -> Self {
        let mut draw = || rng.random_range(-0.1..0.1);
        let transitions = Array2::from_shape_simple_fn((K, K), &mut draw);
        let start = Array1::from_shape_simple_fn(K, &mut draw);
        let stop = Array1::from_shape_simple_fn(K, &mut draw);
        Self {
            transitions,
            start,
            stop,
            constrained,
        }
    }

    /// Effective transition matrix and start vector with the constraint mask applied.
    fn effective(&self) -> (Array2<f64>, Array1<f64>) {
        let mut trans = self.transitions.clone();
        let mut start = self.start.clone();
        if self.constrained {
            trans[[Label::O.index(), Label::I.index()]] = f64::NEG_INFINITY;
            start[Label::I.index()] = f64::NEG_INFINITY;
        }
        (trans, start)
    }

    /// Mutable views of every parameter block, in a fixed order.
    pub fn blocks_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.transitions.as_slice_mut().expect("standard layout"),
            self.start.as_slice_mut().expect("standard layout"),
            self.stop.as_slice_mut().expect("standard layout"),
        ]
    }

    pub fn blocks(&self) -> [&[f64]; 3] {
        [
            self.transitions.as_slice().expect("standard layout"),
            self.start.as_slice().expect("standard layout"),
            self.stop.as_slice().expect("standard layout"),
        ]
    }

    pub fn to_record(&self) -> CrfRecord {
        CrfRecord {
            format: CRF_FORMAT.to_string(),
            version: CRF_VERSION,
            k: K,
            transitions: self.transitions.iter().copied().collect(),
            start: self.start.to_vec(),
            stop: self.stop.to_vec(),
            constrained: self.constrained,
        }
    }

    pub fn from_record(record: CrfRecord) -> Result<Self> {
        if record.format != CRF_FORMAT || record.version != CRF_VERSION {
            return Err(Error::validation(
                "CRF record",
                format!("unsupported format {} v{}", record.format, record.version),
            ));
        }
        if record.k != K || record.transitions.len() != K * K || record.start.len() != K || record.stop.len() != K {
            return Err(Error::validation("CRF record", "shape mismatch"));
        }
        let all = record.transitions.iter().chain(&record.start).chain(&record.stop);
        if all.clone().any(|v| !v.is_finite()) {
            return Err(Error::validation("CRF record", "non-finite parameter"));
        }
        Ok(Self {
            transitions: Array2::from_shape_vec((K, K), record.transitions)
                .map_err(|e| Error::validation("CRF record", e.to_string()))?,
            start: Array1::from(record.start),
            stop: Array1::from(record.stop),
            constrained: record.constrained,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let body = serde_json::to_string_pretty(&self.to_record())?;
        fs::write(path, body + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let body = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_record(serde_json::from_str(&body)?)
    }
}

const CRF_FORMAT: &str = "adetag-crf";
const CRF_VERSION: u32 = 1;

/// On-disk form of [`CrfParams`]; `transitions` is row-major (from, to).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrfRecord {
    pub format: String,
    pub version: u32,
    pub k: usize,
    pub transitions: Vec<f64>,
    pub start: Vec<f64>,
    pub stop: Vec<f64>,
    pub constrained: bool,
}

/// Streaming log-sum-exp; negative infinities contribute nothing.
pub(crate) fn log_sum_exp(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut max = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for v in values {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if v > max {
            sum = sum * (max - v).exp() + 1.0;
            max = v;
        } else {
            sum += (v - max).exp();
        }
    }
    if max == f64::NEG_INFINITY {
        max
    } else {
        max + sum.ln()
    }
}

fn check_len(e: &EmissionMatrix, y: &[Label]) -> Result<()> {
    if y.len() != e.len() {
        return Err(Error::argument(format!(
            "label sequence has {} entries, emission matrix has {} rows",
            y.len(),
            e.len()
        )));
    }
    Ok(())
}

pub fn score_sequence(e: &EmissionMatrix, y: &[Label], p: &CrfParams) -> Result<f64> {
    check_len(e, y)?;
    let (trans, start) = p.effective();
    let s = e.scores();
    let mut score = start[y[0].index()];
    for (t, label) in y.iter().enumerate() {
        score += s[[t, label.index()]];
    }
    for pair in y.windows(2) {
        score += trans[[pair[0].index(), pair[1].index()]];
    }
    score += p.stop[y[y.len() - 1].index()];
    Ok(score)
}

/// Forward and backward log-space tables.
#[derive(Debug, Clone)]
pub struct Lattice {
    /// `alpha[t, k]`: log-sum of all prefixes ending in `k` at `t`, emission included.
    pub alpha: Array2<f64>,
    /// `beta[t, k]`: log-sum of all suffixes after `t` given label `k` at `t`.
    pub beta: Array2<f64>,
    pub log_z: f64,
    /// Log partition recomputed from the backward table.
    pub log_z_backward: f64,
}

pub fn forward_backward(e: &EmissionMatrix, p: &CrfParams) -> Lattice {
    let (trans, start) = p.effective();
    let s = e.scores();
    let len = e.len();

    let mut alpha = Array2::from_elem((len, K), f64::NEG_INFINITY);
    for k in 0..K {
        alpha[[0, k]] = start[k] + s[[0, k]];
    }
    for t in 1..len {
        for k in 0..K {
            alpha[[t, k]] = log_sum_exp((0..K).map(|j| alpha[[t - 1, j]] + trans[[j, k]])) + s[[t, k]];
        }
    }
    let log_z = log_sum_exp((0..K).map(|k| alpha[[len - 1, k]] + p.stop[k]));

    let mut beta = Array2::from_elem((len, K), f64::NEG_INFINITY);
    for k in 0..K {
        beta[[len - 1, k]] = p.stop[k];
    }
    for t in (0..len - 1).rev() {
        for j in 0..K {
            beta[[t, j]] = log_sum_exp((0..K).map(|k| trans[[j, k]] + s[[t + 1, k]] + beta[[t + 1, k]]));
        }
    }
    let log_z_backward = log_sum_exp((0..K).map(|k| start[k] + s[[0, k]] + beta[[0, k]]));

    Lattice {
        alpha,
        beta,
        log_z,
        log_z_backward,
    }
}

/// Log of the sum of `exp(score)` over all `3^L` label paths.
pub fn log_partition(e: &EmissionMatrix, p: &CrfParams) -> f64 {
    let (trans, start) = p.effective();
    let s = e.scores();
    let mut alpha: Vec<f64> = (0..K).map(|k| start[k] + s[[0, k]]).collect();
    for t in 1..e.len() {
        alpha = (0..K)
            .map(|k| log_sum_exp((0..K).map(|j| alpha[j] + trans[[j, k]])) + s[[t, k]])
            .collect();
    }
    log_sum_exp((0..K).map(|k| alpha[k] + p.stop[k]))
}

/// Negative log-likelihood of `y`; never negative.
pub fn nll(e: &EmissionMatrix, y: &[Label], p: &CrfParams) -> Result<f64> {
    let gold = score_sequence(e, y, p)?;
    Ok(log_partition(e, p) - gold)
}

/// `P(y_t = k | e)` for every position.
pub fn posterior_marginals(e: &EmissionMatrix, p: &CrfParams) -> Array2<f64> {
    marginals_from(&forward_backward(e, p))
}

fn marginals_from(lattice: &Lattice) -> Array2<f64> {
    let mut m = &lattice.alpha + &lattice.beta;
    m.mapv_inplace(|v| (v - lattice.log_z).exp());
    m
}

/// Gradients of [`nll`] with respect to the emissions and the CRF parameters:
/// expected counts under the model minus observed counts along `y`.
pub fn nll_gradients(e: &EmissionMatrix, y: &[Label], p: &CrfParams) -> Result<(Array2<f64>, CrfParams)> {
    check_len(e, y)?;
    let lattice = forward_backward(e, p);
    let (trans, _) = p.effective();
    let s = e.scores();
    let len = e.len();

    let mut d_emissions = marginals_from(&lattice);
    let mut grads = CrfParams::zeros(false);
    for k in 0..K {
        grads.start[k] = d_emissions[[0, k]];
        grads.stop[k] = d_emissions[[len - 1, k]];
    }
    for t in 0..len - 1 {
        for j in 0..K {
            for k in 0..K {
                let log_pair = lattice.alpha[[t, j]] + trans[[j, k]] + s[[t + 1, k]] + lattice.beta[[t + 1, k]];
                grads.transitions[[j, k]] += (log_pair - lattice.log_z).exp();
            }
        }
    }

    for (t, label) in y.iter().enumerate() {
        d_emissions[[t, label.index()]] -= 1.0;
    }
    grads.start[y[0].index()] -= 1.0;
    grads.stop[y[len - 1].index()] -= 1.0;
    for pair in y.windows(2) {
        grads.transitions[[pair[0].index(), pair[1].index()]] -= 1.0;
    }
    Ok((d_emissions, grads))
}

/// Highest-scoring path and its score. Ties go to the lower label index
/// (`O < B < I`) at every backtracking step.
pub fn viterbi_decode(e: &EmissionMatrix, p: &CrfParams) -> (LabelSequence, f64) {
    let (trans, start) = p.effective();
    let s = e.scores();
    let len = e.len();

    let mut delta: Vec<f64> = (0..K).map(|k| start[k] + s[[0, k]]).collect();
    let mut backptr = vec![[0usize; K]; len];
    for t in 1..len {
        let mut next = [0.0; K];
        for k in 0..K {
            let (best_j, best) = argmax((0..K).map(|j| delta[j] + trans[[j, k]]));
            backptr[t][k] = best_j;
            next[k] = best + s[[t, k]];
        }
        delta = next.to_vec();
    }
    let (mut k, _) = argmax((0..K).map(|k| delta[k] + p.stop[k]));

    let mut path = vec![Label::O; len];
    for t in (0..len).rev() {
        path[t] = Label::from_index(k).expect("label index in range");
        if t > 0 {
            k = backptr[t][k];
        }
    }
    let score = score_sequence(e, &path, p).expect("path length matches emissions");
    (LabelSequence::subwords(path), score)
}

/// First index attaining the maximum.
fn argmax(values: impl IntoIterator<Item = f64>) -> (usize, f64) {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.into_iter().enumerate() {
        if v > best.1 || i == 0 {
            best = (i, v);
        }
    }
    best
}
