//! Masked static-vector prediction ("approximate outputs" language modelling).
//!
//! For every masked position the encoder sees the mask embedding instead of
//! the token and must reproduce the token's static target vector from the
//! surrounding context.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::encoder::{random_unit, ConvEncoder, ContextualEncoder, EncoderShape};
use super::table::{normalize_key, StaticEmbeddingTable};
use crate::corpus::{tokenize, Token};
use crate::error::{Error, Result};
use crate::nn::{self, Adam, Real};
use crate::rng;
use crate::{Clock, NoClock};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// `1 - cos(predicted, target)`, in `[0, 2]`.
    Cosine,
    /// `‖predicted - target‖²`.
    L2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub encoder: EncoderShape,
    pub epochs: usize,
    /// Stop after this many epochs without improvement of the mean loss.
    pub patience: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    /// Sentences per optimizer step.
    pub batch_size: usize,
    /// Probability that a position is masked; every sentence masks at least one.
    pub mask_rate: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            encoder: EncoderShape::default(),
            epochs: 100,
            patience: 5,
            dropout: 0.2,
            learning_rate: 1e-3,
            batch_size: 32,
            mask_rate: 0.15,
            loss: LossKind::Cosine,
            seed: 0,
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("epochs and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        if !(self.mask_rate > 0.0 && self.mask_rate <= 1.0) {
            return Err(Error::InvalidConfig("mask rate must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainReport {
    /// Mean per-token loss over masked positions, one entry per epoch run.
    pub epoch_losses: Vec<f64>,
    pub stopped_epoch: usize,
    pub seconds: f64,
}

/// Targets for every word of `corpus`: the seed vector where the seed table
/// knows the word, a seeded random unit vector otherwise.
pub fn target_table(corpus: &[String], seeds: &StaticEmbeddingTable, seed: u64) -> Result<StaticEmbeddingTable> {
    let mut words: Vec<String> = Vec::new();
    let mut seen = BTreeMap::new();
    for sentence in corpus {
        for tok in tokenize(sentence) {
            let key = normalize_key(&tok.text);
            if !seen.contains_key(&key) {
                seen.insert(key.clone(), ());
                words.push(key);
            }
        }
    }
    words.sort();
    let dim = seeds.dim();
    let mut rng = rng::derive(seed, 21);
    let mut vectors = Vec::with_capacity((words.len() + 1) * dim);
    for w in &words {
        if seeds.contains(w) {
            vectors.extend_from_slice(seeds.lookup(w));
        } else {
            vectors.extend(random_unit(&mut rng, dim));
        }
    }
    vectors.extend_from_slice(seeds.row(seeds.unk_index()));
    StaticEmbeddingTable::from_rows(dim, words, vectors, false)
}

impl<T: Real> ConvEncoder<T> {
    /// Sum of per-position losses over masked positions.
    pub fn masked_loss(
        &self,
        inputs: &[T],
        masked: &[bool],
        targets: &[Vec<T>],
        kind: LossKind,
    ) -> T {
        let trace = self.forward(inputs.to_vec(), None);
        let dim = self.shape.dim;
        masked
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .fold(T::zero(), |acc, (i, _)| {
                acc + position_loss(&trace.out[i * dim..(i + 1) * dim], &targets[i], kind, None)
            })
    }

    /// Loss as in [`ConvEncoder::masked_loss`], accumulating gradients into
    /// `grads`. `drop` is an optional dropout mask over `h₀`.
    pub fn masked_loss_grad(
        &self,
        inputs: &[T],
        masked: &[bool],
        targets: &[Vec<T>],
        kind: LossKind,
        drop: Option<Vec<T>>,
        grads: &mut Self,
    ) -> T {
        let trace = self.forward(inputs.to_vec(), drop);
        let dim = self.shape.dim;
        let mut d_out = vec![T::zero(); trace.out.len()];
        let mut loss = T::zero();
        for (i, _) in masked.iter().enumerate().filter(|(_, &m)| m) {
            loss = loss
                + position_loss(
                    &trace.out[i * dim..(i + 1) * dim],
                    &targets[i],
                    kind,
                    Some(&mut d_out[i * dim..(i + 1) * dim]),
                );
        }
        self.backward(&trace, &d_out, Some(masked), grads);
        loss
    }
}

fn position_loss<T: Real>(pred: &[T], target: &[T], kind: LossKind, grad: Option<&mut [T]>) -> T {
    match kind {
        LossKind::Cosine => {
            let eps = T::from_f64(1e-12);
            let np = nn::norm(pred).max(eps);
            let nt = nn::norm(target).max(eps);
            let cos = nn::dot(pred, target) / (np * nt);
            if let Some(g) = grad {
                // d(1 - cos)/dp = -(t / (|p||t|) - cos · p / |p|²)
                for ((gi, &p), &t) in g.iter_mut().zip(pred).zip(target) {
                    *gi = -(t / (np * nt) - cos * p / (np * np));
                }
            }
            T::one() - cos
        }
        LossKind::L2 => {
            let mut loss = T::zero();
            for (&p, &t) in pred.iter().zip(target) {
                let d = p - t;
                loss = loss + d * d;
            }
            if let Some(g) = grad {
                for ((gi, &p), &t) in g.iter_mut().zip(pred).zip(target) {
                    *gi = T::from_f64(2.0) * (p - t);
                }
            }
            loss
        }
    }
}

/// [`pretrain_contextual_with_clock`] without timing.
pub fn pretrain_contextual(
    corpus: &[String],
    seeds: &StaticEmbeddingTable,
    config: &PretrainConfig,
) -> Result<(ContextualEncoder, PretrainReport)> {
    pretrain_contextual_with_clock(corpus, seeds, config, &NoClock)
}

/// Train a fresh encoder on `corpus`, seeded from `seeds`.
pub fn pretrain_contextual_with_clock(
    corpus: &[String],
    seeds: &StaticEmbeddingTable,
    config: &PretrainConfig,
    clock: &dyn Clock,
) -> Result<(ContextualEncoder, PretrainReport)> {
    config.validate()?;
    if seeds.dim() != config.encoder.dim {
        return Err(Error::DimMismatch {
            expected: config.encoder.dim,
            found: seeds.dim(),
        });
    }
    let sentences: Vec<Vec<Token>> = corpus
        .iter()
        .map(|s| tokenize(s))
        .filter(|t| !t.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let started = clock.now_secs();
    let targets = target_table(corpus, seeds, config.seed)?;
    let target_rows: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().map(|t| targets.index(&t.text)).collect())
        .collect();

    let mut encoder = ContextualEncoder::new(config.encoder, config.seed)?;
    let mut grads = encoder.zeros_like();
    let mut adam = Adam::<f32>::new(config.learning_rate, encoder.params().iter().map(|p| p.len()));
    let mut rng = rng::derive(config.seed, 22);
    let mut order: Vec<usize> = (0..sentences.len()).collect();
    let dim = config.encoder.dim;

    let mut report = PretrainReport {
        epoch_losses: Vec::new(),
        stopped_epoch: 0,
        seconds: 0.0,
    };
    let mut best = f64::INFINITY;
    let mut stale = 0;
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0f64;
        let mut epoch_count = 0usize;
        for batch in order.chunks(config.batch_size) {
            for p in grads.params_mut() {
                p.fill(0.0);
            }
            let mut batch_count = 0usize;
            for &s in batch {
                let tokens = &sentences[s];
                let n = tokens.len();
                let mut masked: Vec<bool> = (0..n).map(|_| rng.random::<f64>() < config.mask_rate).collect();
                if !masked.iter().any(|&m| m) {
                    masked[rng.random_range(0..n)] = true;
                }
                let inputs = encoder.inputs(seeds, tokens, Some(&masked));
                let goal: Vec<Vec<f32>> = target_rows[s].iter().map(|&r| targets.row(r).to_vec()).collect();
                let drop = if config.dropout > 0.0 {
                    let mut d = vec![0.0f32; n * dim];
                    nn::dropout_mask(config.dropout, &mut rng, &mut d);
                    Some(d)
                } else {
                    None
                };
                let loss = encoder.masked_loss_grad(&inputs, &masked, &goal, config.loss, drop, &mut grads);
                let count = masked.iter().filter(|&&m| m).count();
                epoch_loss += loss as f64;
                epoch_count += count;
                batch_count += count;
            }
            let scale = 1.0 / batch_count.max(1) as f32;
            adam.update(encoder.params_mut(), grads.params(), scale);
        }
        let mean = epoch_loss / epoch_count.max(1) as f64;
        report.epoch_losses.push(mean);
        if mean < best - 1e-4 {
            best = mean;
            stale = 0;
        } else {
            stale += 1;
        }
        if config.patience > 0 && stale >= config.patience {
            break;
        }
    }
    report.stopped_epoch = report.epoch_losses.len();
    report.seconds = clock.now_secs() - started;
    Ok((encoder, report))
}
