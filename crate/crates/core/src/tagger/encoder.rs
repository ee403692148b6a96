//! Desk-scale contextual encoder: token + position embeddings, one multi-head
//! self-attention block and a ReLU feed-forward layer (both residual), and a
//! linear projection to the three label scores followed by log-softmax.
//!
//! Backpropagation is written out by hand for this fixed architecture.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labeling::Label;

const OUT: usize = Label::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderShape {
    pub vocab_size: usize,
    pub max_len: usize,
    pub d_model: usize,
    pub heads: usize,
    pub ff_dim: usize,
}

impl EncoderShape {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.max_len == 0 || self.d_model == 0 || self.ff_dim == 0 {
            return Err(Error::argument("encoder dimensions must be positive"));
        }
        if self.heads == 0 || !self.d_model.is_multiple_of(self.heads) {
            return Err(Error::argument(format!(
                "d_model {} not divisible by {} heads",
                self.d_model, self.heads
            )));
        }
        Ok(())
    }

    fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }
}

/// Every trainable tensor. Biases are stored as vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub token_embedding: Array2<f64>,
    pub position_embedding: Array2<f64>,
    pub w_query: Array2<f64>,
    pub b_query: Array1<f64>,
    pub w_key: Array2<f64>,
    pub b_key: Array1<f64>,
    pub w_value: Array2<f64>,
    pub b_value: Array1<f64>,
    pub w_attn_out: Array2<f64>,
    pub b_attn_out: Array1<f64>,
    pub w_ff_in: Array2<f64>,
    pub b_ff_in: Array1<f64>,
    pub w_ff_out: Array2<f64>,
    pub b_ff_out: Array1<f64>,
    pub w_proj: Array2<f64>,
    pub b_proj: Array1<f64>,
}

macro_rules! each_tensor {
    ($self:ident, $method:ident) => {
        vec![
            $self.token_embedding.$method().expect("standard layout"),
            $self.position_embedding.$method().expect("standard layout"),
            $self.w_query.$method().expect("standard layout"),
            $self.b_query.$method().expect("standard layout"),
            $self.w_key.$method().expect("standard layout"),
            $self.b_key.$method().expect("standard layout"),
            $self.w_value.$method().expect("standard layout"),
            $self.b_value.$method().expect("standard layout"),
            $self.w_attn_out.$method().expect("standard layout"),
            $self.b_attn_out.$method().expect("standard layout"),
            $self.w_ff_in.$method().expect("standard layout"),
            $self.b_ff_in.$method().expect("standard layout"),
            $self.w_ff_out.$method().expect("standard layout"),
            $self.b_ff_out.$method().expect("standard layout"),
            $self.w_proj.$method().expect("standard layout"),
            $self.b_proj.$method().expect("standard layout"),
        ]
    };
}

impl EncoderParams {
    pub fn zeros(shape: &EncoderShape) -> Self {
        let d = shape.d_model;
        let f = shape.ff_dim;
        Self {
            token_embedding: Array2::zeros((shape.vocab_size, d)),
            position_embedding: Array2::zeros((shape.max_len, d)),
            w_query: Array2::zeros((d, d)),
            b_query: Array1::zeros(d),
            w_key: Array2::zeros((d, d)),
            b_key: Array1::zeros(d),
            w_value: Array2::zeros((d, d)),
            b_value: Array1::zeros(d),
            w_attn_out: Array2::zeros((d, d)),
            b_attn_out: Array1::zeros(d),
            w_ff_in: Array2::zeros((d, f)),
            b_ff_in: Array1::zeros(f),
            w_ff_out: Array2::zeros((f, d)),
            b_ff_out: Array1::zeros(d),
            w_proj: Array2::zeros((d, OUT)),
            b_proj: Array1::zeros(OUT),
        }
    }

    pub fn blocks(&self) -> Vec<&[f64]> {
        each_tensor!(self, as_slice)
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        each_tensor!(self, as_slice_mut)
    }

    pub fn add_assign(&mut self, other: &EncoderParams) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for block in self.blocks_mut() {
            block.iter_mut().for_each(|v| *v *= factor);
        }
    }
}

/// Intermediate activations kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Array2<f64>,
    query: Array2<f64>,
    key: Array2<f64>,
    value: Array2<f64>,
    attention: Vec<Array2<f64>>,
    context: Array2<f64>,
    attn_mask: Option<Array2<f64>>,
    hidden1: Array2<f64>,
    ff_pre: Array2<f64>,
    ff_act: Array2<f64>,
    ff_mask: Option<Array2<f64>>,
    hidden2: Array2<f64>,
    /// Row-wise log-softmax of the label logits.
    pub log_probs: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyEncoder {
    pub shape: EncoderShape,
    pub params: EncoderParams,
}

impl ToyEncoder {
    /// Embeddings from `uniform(-0.5, 0.5)`, weights from
    /// `uniform(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn init<R: Rng + ?Sized>(shape: EncoderShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let mut params = EncoderParams::zeros(&shape);
        let mut fill = |a: &mut Array2<f64>, bound: f64| {
            a.mapv_inplace(|_| rng.random_range(-bound..bound));
        };
        fill(&mut params.token_embedding, 0.5);
        fill(&mut params.position_embedding, 0.5);
        let dk = 1.0 / (shape.d_model as f64).sqrt();
        let fk = 1.0 / (shape.ff_dim as f64).sqrt();
        fill(&mut params.w_query, dk);
        fill(&mut params.w_key, dk);
        fill(&mut params.w_value, dk);
        fill(&mut params.w_attn_out, dk);
        fill(&mut params.w_ff_in, dk);
        fill(&mut params.w_ff_out, fk);
        fill(&mut params.w_proj, dk);
        Ok(Self { shape, params })
    }

    fn check_ids(&self, ids: &[u32]) -> Result<()> {
        if ids.is_empty() || ids.len() > self.shape.max_len {
            return Err(Error::argument(format!(
                "sequence length {} outside 1..={}",
                ids.len(),
                self.shape.max_len
            )));
        }
        if let Some(bad) = ids.iter().find(|&&i| i as usize >= self.shape.vocab_size) {
            return Err(Error::argument(format!(
                "token id {bad} outside vocabulary of {}",
                self.shape.vocab_size
            )));
        }
        Ok(())
    }

    /// Forward pass over the unmasked token ids. With `dropout = Some((p, rng))`
    /// inverted dropout is applied to the attention and feed-forward outputs.
    pub fn forward<R: Rng + ?Sized>(&self, ids: &[u32], dropout: Option<(f64, &mut R)>) -> Result<ForwardCache> {
        self.check_ids(ids)?;
        let p = &self.params;
        let n = ids.len();
        let hd = self.shape.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        let mut input = Array2::zeros((n, self.shape.d_model));
        for (i, &id) in ids.iter().enumerate() {
            let mut row = input.row_mut(i);
            row += &p.token_embedding.row(id as usize);
            row += &p.position_embedding.row(i);
        }

        let query = input.dot(&p.w_query) + &p.b_query;
        let key = input.dot(&p.w_key) + &p.b_key;
        let value = input.dot(&p.w_value) + &p.b_value;

        let mut context = Array2::zeros((n, self.shape.d_model));
        let mut attention = Vec::with_capacity(self.shape.heads);
        for h in 0..self.shape.heads {
            let cols = s![.., h * hd..(h + 1) * hd];
            let mut scores = query.slice(cols).dot(&key.slice(cols).t()) * scale;
            softmax_rows(&mut scores);
            context.slice_mut(cols).assign(&scores.dot(&value.slice(cols)));
            attention.push(scores);
        }
        let mut attn_out = context.dot(&p.w_attn_out) + &p.b_attn_out;

        let (rate, mut rng) = match dropout {
            Some((rate, rng)) if rate > 0.0 => (rate, Some(rng)),
            _ => (0.0, None),
        };
        let mut draw_mask = |shape: (usize, usize)| -> Option<Array2<f64>> {
            let rng = rng.as_mut()?;
            let keep = 1.0 / (1.0 - rate);
            Some(Array2::from_shape_simple_fn(shape, || {
                if rng.random::<f64>() < rate {
                    0.0
                } else {
                    keep
                }
            }))
        };

        let attn_mask = draw_mask(attn_out.dim());
        if let Some(mask) = &attn_mask {
            attn_out *= mask;
        }
        let hidden1 = &input + &attn_out;

        let ff_pre = hidden1.dot(&p.w_ff_in) + &p.b_ff_in;
        let ff_act = ff_pre.mapv(|v| v.max(0.0));
        let mut ff_out = ff_act.dot(&p.w_ff_out) + &p.b_ff_out;
        let ff_mask = draw_mask(ff_out.dim());
        if let Some(mask) = &ff_mask {
            ff_out *= mask;
        }
        let hidden2 = &hidden1 + &ff_out;

        let mut log_probs = hidden2.dot(&p.w_proj) + &p.b_proj;
        log_softmax_rows(&mut log_probs);

        Ok(ForwardCache {
            input,
            query,
            key,
            value,
            attention,
            context,
            attn_mask,
            hidden1,
            ff_pre,
            ff_act,
            ff_mask,
            hidden2,
            log_probs,
        })
    }

    /// Label log-probabilities without dropout.
    pub fn log_probs(&self, ids: &[u32]) -> Result<Array2<f64>> {
        Ok(self.forward::<rand_chacha::ChaCha8Rng>(ids, None)?.log_probs)
    }

    /// Parameter gradients given `d_log_probs`, the loss gradient with respect
    /// to the log-softmax output.
    pub fn backward(&self, ids: &[u32], cache: &ForwardCache, d_log_probs: ArrayView2<f64>) -> EncoderParams {
        let p = &self.params;
        let mut g = EncoderParams::zeros(&self.shape);
        let hd = self.shape.head_dim();
        let scale = 1.0 / (hd as f64).sqrt();

        // log-softmax: dz = g - softmax * rowsum(g)
        let probs = cache.log_probs.mapv(f64::exp);
        let row_sums = d_log_probs.sum_axis(Axis(1)).insert_axis(Axis(1));
        let d_logits = &d_log_probs - &(&probs * &row_sums);

        g.w_proj = cache.hidden2.t().dot(&d_logits);
        g.b_proj = d_logits.sum_axis(Axis(0));
        let d_hidden2 = d_logits.dot(&p.w_proj.t());

        let mut d_ff_out = d_hidden2.clone();
        if let Some(mask) = &cache.ff_mask {
            d_ff_out *= mask;
        }
        g.w_ff_out = cache.ff_act.t().dot(&d_ff_out);
        g.b_ff_out = d_ff_out.sum_axis(Axis(0));
        let mut d_ff_pre = d_ff_out.dot(&p.w_ff_out.t());
        d_ff_pre.zip_mut_with(&cache.ff_pre, |d, &pre| {
            if pre <= 0.0 {
                *d = 0.0;
            }
        });
        g.w_ff_in = cache.hidden1.t().dot(&d_ff_pre);
        g.b_ff_in = d_ff_pre.sum_axis(Axis(0));
        let d_hidden1 = d_hidden2 + d_ff_pre.dot(&p.w_ff_in.t());

        let mut d_attn_out = d_hidden1.clone();
        if let Some(mask) = &cache.attn_mask {
            d_attn_out *= mask;
        }
        g.w_attn_out = cache.context.t().dot(&d_attn_out);
        g.b_attn_out = d_attn_out.sum_axis(Axis(0));
        let d_context = d_attn_out.dot(&p.w_attn_out.t());

        let n = ids.len();
        let mut d_query = Array2::zeros((n, self.shape.d_model));
        let mut d_key = Array2::zeros((n, self.shape.d_model));
        let mut d_value = Array2::zeros((n, self.shape.d_model));
        for (h, attn) in cache.attention.iter().enumerate() {
            let cols = s![.., h * hd..(h + 1) * hd];
            let d_ctx = d_context.slice(cols);
            let d_attn = d_ctx.dot(&cache.value.slice(cols).t());
            d_value.slice_mut(cols).assign(&attn.t().dot(&d_ctx));
            // softmax backward, row-wise
            let inner = (&d_attn * attn).sum_axis(Axis(1)).insert_axis(Axis(1));
            let d_scores = attn * &(&d_attn - &inner) * scale;
            d_query.slice_mut(cols).assign(&d_scores.dot(&cache.key.slice(cols)));
            d_key
                .slice_mut(cols)
                .assign(&d_scores.t().dot(&cache.query.slice(cols)));
        }
        g.w_query = cache.input.t().dot(&d_query);
        g.b_query = d_query.sum_axis(Axis(0));
        g.w_key = cache.input.t().dot(&d_key);
        g.b_key = d_key.sum_axis(Axis(0));
        g.w_value = cache.input.t().dot(&d_value);
        g.b_value = d_value.sum_axis(Axis(0));

        let d_input = d_hidden1 + d_query.dot(&p.w_query.t()) + d_key.dot(&p.w_key.t()) + d_value.dot(&p.w_value.t());
        for (i, &id) in ids.iter().enumerate() {
            let row = d_input.row(i);
            let mut tok = g.token_embedding.row_mut(id as usize);
            tok += &row;
            let mut pos = g.position_embedding.row_mut(i);
            pos += &row;
        }
        g
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        out.extend_from_slice(ENCODER_MAGIC);
        out.extend_from_slice(&ENCODER_VERSION.to_le_bytes());
        for dim in [
            self.shape.vocab_size,
            self.shape.max_len,
            self.shape.d_model,
            self.shape.heads,
            self.shape.ff_dim,
        ] {
            out.extend_from_slice(&(dim as u64).to_le_bytes());
        }
        for block in self.params.blocks() {
            for v in block {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&out).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        let bad = |msg: &str| Error::validation(path.display().to_string(), msg.to_string());
        let mut cursor = bytes.as_slice();
        let mut take = |n: usize| -> Result<&[u8]> {
            if cursor.len() < n {
                return Err(bad("truncated encoder file"));
            }
            let (head, rest) = cursor.split_at(n);
            cursor = rest;
            Ok(head)
        };
        if take(ENCODER_MAGIC.len())? != ENCODER_MAGIC {
            return Err(bad("not an encoder parameter file"));
        }
        let version = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        if version != ENCODER_VERSION {
            return Err(bad("unsupported encoder file version"));
        }
        let mut dims = [0usize; 5];
        for d in &mut dims {
            *d = u64::from_le_bytes(take(8)?.try_into().expect("8 bytes")) as usize;
        }
        let shape = EncoderShape {
            vocab_size: dims[0],
            max_len: dims[1],
            d_model: dims[2],
            heads: dims[3],
            ff_dim: dims[4],
        };
        shape.validate()?;
        let mut params = EncoderParams::zeros(&shape);
        for block in params.blocks_mut() {
            for v in block.iter_mut() {
                *v = f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"));
            }
        }
        if !cursor.is_empty() {
            return Err(bad("trailing bytes after encoder parameters"));
        }
        Ok(Self { shape, params })
    }
}

const ENCODER_MAGIC: &[u8] = b"ADETENC\0";
const ENCODER_VERSION: u32 = 1;

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

pub(crate) fn log_softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let lse = crate::crf::log_sum_exp(row.iter().copied());
        row -= lse;
    }
}
