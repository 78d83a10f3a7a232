//! Residual convolutional encoder over static token vectors.
//!
//! `x → h₀ = tanh(W_in x) → hₗ₊₁ = hₗ + tanh(Wₗ [hₗ(i-w) … hₗ(i+w)]) → W_out h_depth`
//!
//! Positions outside the sentence are zero, so the vector of token `i`
//! depends only on tokens within `depth × window` positions.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::table::{shape_features, StaticEmbeddingTable, SHAPE_DIM};
use crate::codec::{Reader, Writer};
use crate::corpus::Token;
use crate::error::{Error, Result};
use crate::nn::{self, Dense, Real};
use crate::rng::{self, Rng};

const MAGIC: &[u8; 4] = b"EHRC";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderShape {
    pub dim: usize,
    pub depth: usize,
    pub window: usize,
}

impl Default for EncoderShape {
    fn default() -> Self {
        EncoderShape {
            dim: 64,
            depth: 4,
            window: 1,
        }
    }
}

impl EncoderShape {
    pub fn input_dim(&self) -> usize {
        self.dim + SHAPE_DIM
    }

    pub fn receptive_radius(&self) -> usize {
        self.depth * self.window
    }

    fn span(&self) -> usize {
        2 * self.window + 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvEncoder<T> {
    pub shape: EncoderShape,
    pub seed: u64,
    pub input: Dense<T>,
    /// Replaces a hidden token's whole input vector during pretraining.
    pub mask: Vec<T>,
    pub layers: Vec<Dense<T>>,
    pub output: Dense<T>,
}

pub type ContextualEncoder = ConvEncoder<f32>;
pub type EncoderGrads<T> = ConvEncoder<T>;

/// Intermediate activations kept for the backward pass.
pub(crate) struct Trace<T> {
    pub inputs: Vec<T>,
    pub h0: Vec<T>,
    pub drop: Option<Vec<T>>,
    pub hidden: Vec<Vec<T>>,
    pub acts: Vec<Vec<T>>,
    pub out: Vec<T>,
}

impl<T: Real> ConvEncoder<T> {
    pub fn new(shape: EncoderShape, seed: u64) -> Result<Self> {
        if shape.dim == 0 || shape.depth == 0 {
            return Err(Error::InvalidConfig("encoder dim and depth must be at least 1".into()));
        }
        let mut rng = rng::derive(seed, 11);
        let dim = shape.dim;
        let input = Dense::init(shape.input_dim(), dim, &mut rng);
        let mask = (0..shape.input_dim())
            .map(|_| T::from_f64(rng::uniform(&mut rng, -0.1, 0.1)))
            .collect();
        let layers = (0..shape.depth)
            .map(|_| Dense::init(shape.span() * dim, dim, &mut rng))
            .collect();
        let output = Dense::init(dim, dim, &mut rng);
        Ok(ConvEncoder {
            shape,
            seed,
            input,
            mask,
            layers,
            output,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(T::zero());
        }
        z
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut out: Vec<&[T]> = self.input.params().into();
        out.push(&self.mask);
        for l in &self.layers {
            out.extend(l.params());
        }
        out.extend(self.output.params());
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut out: Vec<&mut [T]> = self.input.params_mut().into();
        out.push(&mut self.mask);
        for l in &mut self.layers {
            out.extend(l.params_mut());
        }
        out.extend(self.output.params_mut());
        out
    }

    pub fn cast<U: Real>(&self) -> ConvEncoder<U> {
        ConvEncoder {
            shape: self.shape,
            seed: self.seed,
            input: self.input.cast(),
            mask: nn::cast_vec(&self.mask),
            layers: self.layers.iter().map(Dense::cast).collect(),
            output: self.output.cast(),
        }
    }

    /// Input vectors (`n × input_dim`): static vector plus shape features,
    /// or the mask embedding where `masked[i]` is set.
    pub fn inputs(&self, seeds: &StaticEmbeddingTable, tokens: &[Token], masked: Option<&[bool]>) -> Vec<T> {
        let width = self.shape.input_dim();
        let mut x = Vec::with_capacity(tokens.len() * width);
        for (i, tok) in tokens.iter().enumerate() {
            if masked.is_some_and(|m| m[i]) {
                x.extend_from_slice(&self.mask);
            } else {
                x.extend(seeds.lookup(&tok.text).iter().map(|&v| T::from_f64(v as f64)));
                x.extend(shape_features(&tok.text).iter().map(|&v| T::from_f64(v as f64)));
            }
        }
        x
    }

    fn window(&self, h: &[T], i: usize, n: usize, buf: &mut [T]) {
        let dim = self.shape.dim;
        let w = self.shape.window as isize;
        for (k, off) in (-w..=w).enumerate() {
            let j = i as isize + off;
            let dst = &mut buf[k * dim..(k + 1) * dim];
            if j < 0 || j >= n as isize {
                dst.fill(T::zero());
            } else {
                let j = j as usize;
                dst.copy_from_slice(&h[j * dim..(j + 1) * dim]);
            }
        }
    }

    pub(crate) fn forward(&self, inputs: Vec<T>, drop: Option<Vec<T>>) -> Trace<T> {
        let dim = self.shape.dim;
        let in_dim = self.shape.input_dim();
        let n = inputs.len() / in_dim;
        let mut h0 = vec![T::zero(); n * dim];
        for i in 0..n {
            let y = &mut h0[i * dim..(i + 1) * dim];
            self.input.forward(&inputs[i * in_dim..(i + 1) * in_dim], y);
            y.iter_mut().for_each(|v| *v = v.tanh());
        }
        let mut h = h0.clone();
        if let Some(d) = &drop {
            h.iter_mut().zip(d).for_each(|(v, &m)| *v = *v * m);
        }
        let mut hidden = vec![h];
        let mut acts = Vec::with_capacity(self.layers.len());
        let mut win = vec![T::zero(); self.shape.span() * dim];
        for layer in &self.layers {
            let prev = hidden.last().expect("at least one hidden state");
            let mut act = vec![T::zero(); n * dim];
            for i in 0..n {
                self.window(prev, i, n, &mut win);
                let y = &mut act[i * dim..(i + 1) * dim];
                layer.forward(&win, y);
                y.iter_mut().for_each(|v| *v = v.tanh());
            }
            let next: Vec<T> = prev.iter().zip(&act).map(|(&a, &b)| a + b).collect();
            acts.push(act);
            hidden.push(next);
        }
        let top = hidden.last().expect("hidden states");
        let mut out = vec![T::zero(); n * dim];
        for i in 0..n {
            self.output
                .forward(&top[i * dim..(i + 1) * dim], &mut out[i * dim..(i + 1) * dim]);
        }
        Trace {
            inputs,
            h0,
            drop,
            hidden,
            acts,
            out,
        }
    }

    /// Accumulate parameter gradients for upstream gradient `d_out`
    /// (`n × dim`). Gradients flowing into masked positions' inputs go to
    /// the mask embedding.
    pub(crate) fn backward(&self, trace: &Trace<T>, d_out: &[T], masked: Option<&[bool]>, grads: &mut Self) {
        let dim = self.shape.dim;
        let in_dim = self.shape.input_dim();
        let n = d_out.len() / dim;
        let top = trace.hidden.last().expect("hidden states");
        let mut dh = vec![T::zero(); n * dim];
        for i in 0..n {
            self.output.backward(
                &top[i * dim..(i + 1) * dim],
                &d_out[i * dim..(i + 1) * dim],
                &mut grads.output,
                Some(&mut dh[i * dim..(i + 1) * dim]),
            );
        }
        let span = self.shape.span();
        let w = self.shape.window as isize;
        let mut win = vec![T::zero(); span * dim];
        let mut dwin = vec![T::zero(); span * dim];
        let mut da = vec![T::zero(); dim];
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let prev = &trace.hidden[l];
            let act = &trace.acts[l];
            // Residual path carries dh through unchanged.
            let mut dprev = dh.clone();
            for i in 0..n {
                for k in 0..dim {
                    let a = act[i * dim + k];
                    da[k] = dh[i * dim + k] * (T::one() - a * a);
                }
                self.window(prev, i, n, &mut win);
                dwin.fill(T::zero());
                layer.backward(&win, &da, &mut grads.layers[l], Some(&mut dwin));
                for (k, off) in (-w..=w).enumerate() {
                    let j = i as isize + off;
                    if j >= 0 && j < n as isize {
                        let j = j as usize;
                        nn::axpy(T::one(), &dwin[k * dim..(k + 1) * dim], &mut dprev[j * dim..(j + 1) * dim]);
                    }
                }
            }
            dh = dprev;
        }
        let mut dx = vec![T::zero(); in_dim];
        let mut dpre = vec![T::zero(); dim];
        for i in 0..n {
            for k in 0..dim {
                let idx = i * dim + k;
                let m = trace.drop.as_ref().map_or(T::one(), |d| d[idx]);
                let a = trace.h0[idx];
                dpre[k] = dh[idx] * m * (T::one() - a * a);
            }
            let is_masked = masked.is_some_and(|m| m[i]);
            dx.fill(T::zero());
            self.input.backward(
                &trace.inputs[i * in_dim..(i + 1) * in_dim],
                &dpre,
                &mut grads.input,
                if is_masked { Some(&mut dx) } else { None },
            );
            if is_masked {
                nn::axpy(T::one(), &dx, &mut grads.mask);
            }
        }
    }
}

impl ContextualEncoder {
    /// Forward pass without masking or dropout, flattened `n × dim`.
    pub fn encode_flat(&self, seeds: &StaticEmbeddingTable, tokens: &[Token]) -> Vec<f32> {
        if tokens.is_empty() {
            return Vec::new();
        }
        self.forward(self.inputs(seeds, tokens, None), None).out
    }

    /// Layout after the header: `u32 dim`, `u32 depth`, `u32 window`,
    /// `u64 seed`, then `f32` blobs for input weight, input bias, mask, each
    /// layer's weight and bias, output weight and output bias.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(MAGIC);
        self.write_body(&mut w);
        w.finish()
    }

    pub(crate) fn write_body(&self, w: &mut Writer) {
        w.u32(self.shape.dim as u32);
        w.u32(self.shape.depth as u32);
        w.u32(self.shape.window as u32);
        w.u64(self.seed);
        for p in self.params() {
            w.f32s(p);
        }
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, MAGIC)?;
        let enc = Self::read_body(&mut r)?;
        r.finish()?;
        Ok(enc)
    }

    /// Load and require a specific output dimension.
    pub fn from_bytes_expecting(bytes: &[u8], dim: usize) -> Result<Self> {
        let enc = Self::from_bytes(bytes)?;
        if enc.shape.dim != dim {
            return Err(Error::DimMismatch {
                expected: dim,
                found: enc.shape.dim,
            });
        }
        Ok(enc)
    }

    pub(crate) fn read_body(r: &mut Reader<'_>) -> Result<Self> {
        let shape = EncoderShape {
            dim: r.usize()?,
            depth: r.usize()?,
            window: r.usize()?,
        };
        if shape.depth > 1024 || shape.window > 1024 || shape.dim > 1 << 16 {
            return Err(crate::FormatError::Invalid("implausible encoder shape".into()).into());
        }
        let seed = r.u64()?;
        let mut enc = ConvEncoder::<f32>::new(shape, seed)?;
        for p in enc.params_mut() {
            let len = p.len();
            p.copy_from_slice(&r.f32s_exact(len, "encoder")?);
        }
        Ok(enc)
    }
}

pub(crate) fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..dim).map(|_| rng::uniform(rng, -1.0, 1.0) as f32).collect();
    let n = nn::norm(&v);
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    v
}
