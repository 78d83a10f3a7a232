//! Skip-gram with negative sampling.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::table::{normalize_key, StaticEmbeddingTable};
use crate::corpus::tokenize;
use crate::error::{Error, Result};
use crate::nn::{self, Real};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dim: usize,
    /// Maximum context radius; each center samples a radius in `1..=window`.
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_count: usize,
    pub normalize: bool,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dim: 64,
            window: 3,
            negatives: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 3,
            normalize: true,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.window == 0 || self.negatives == 0 || self.epochs == 0 {
            return Err(Error::InvalidConfig(
                "skip-gram dim, window, negatives and epochs must all be at least 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// `-ln σ(u₊·v) - Σ ln σ(-u₋·v)` for center vector `v`, positive output
/// vector `u₊` and negative output vectors `u₋`.
pub fn negative_sampling_loss<T: Real>(center: &[T], positive: &[T], negatives: &[&[T]]) -> T {
    let mut loss = -nn::log_sigmoid(nn::dot(positive, center));
    for neg in negatives {
        loss = loss - nn::log_sigmoid(-nn::dot(neg, center));
    }
    loss
}

/// Gradient of [`negative_sampling_loss`]. Overwrites `d_center`,
/// `d_positive` and each row of `d_negatives`; returns the loss.
pub fn negative_sampling_grad<T: Real>(
    center: &[T],
    positive: &[T],
    negatives: &[&[T]],
    d_center: &mut [T],
    d_positive: &mut [T],
    d_negatives: &mut [Vec<T>],
) -> T {
    d_center.fill(T::zero());
    let score = nn::dot(positive, center);
    let mut loss = -nn::log_sigmoid(score);
    // d/ds [-ln σ(s)] = σ(s) - 1
    let g = nn::sigmoid(score) - T::one();
    for (d, &c) in d_positive.iter_mut().zip(center) {
        *d = g * c;
    }
    nn::axpy(g, positive, d_center);
    for (neg, d_neg) in negatives.iter().zip(d_negatives.iter_mut()) {
        let score = nn::dot(neg, center);
        loss = loss - nn::log_sigmoid(-score);
        // d/ds [-ln σ(-s)] = σ(s)
        let g = nn::sigmoid(score);
        for (d, &c) in d_neg.iter_mut().zip(center) {
            *d = g * c;
        }
        nn::axpy(g, neg, d_center);
    }
    loss
}

/// Train skip-gram vectors on raw sentences. Words seen fewer than
/// `min_count` times share the UNK row, which is trained like any other word.
pub fn train_static_embeddings(corpus: &[String], config: &SkipGramConfig) -> Result<StaticEmbeddingTable> {
    config.validate()?;
    let sentences: Vec<Vec<String>> = corpus
        .iter()
        .map(|s| tokenize(s).into_iter().map(|t| normalize_key(&t.text)).collect::<Vec<_>>())
        .filter(|s: &Vec<String>| !s.is_empty())
        .collect();
    if sentences.is_empty() {
        return Err(Error::EmptyCorpus);
    }

    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for w in sentences.iter().flatten() {
        *counts.entry(w.as_str()).or_insert(0) += 1;
    }
    let mut kept: Vec<(&str, usize)> = counts
        .iter()
        .filter(|(_, &c)| c >= config.min_count)
        .map(|(&w, &c)| (w, c))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let index: BTreeMap<&str, usize> = kept.iter().enumerate().map(|(i, (w, _))| (*w, i)).collect();
    let unk = kept.len();
    let rows = unk + 1;
    let dim = config.dim;

    let ids: Vec<Vec<usize>> = sentences
        .iter()
        .map(|s| s.iter().map(|w| index.get(w.as_str()).copied().unwrap_or(unk)).collect())
        .collect();
    let mut freq = vec![0usize; rows];
    ids.iter().flatten().for_each(|&i| freq[i] += 1);

    // Unigram^0.75 noise distribution.
    let weights: Vec<f64> = freq.iter().map(|&f| libm::pow(f as f64, 0.75)).collect();
    let total_w: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let noise_cdf: Vec<f64> = weights
        .iter()
        .map(|w| {
            acc += w / total_w;
            acc
        })
        .collect();

    let mut rng = rng::seeded(config.seed);
    let mut input: Vec<f32> = (0..rows * dim)
        .map(|_| rng::uniform(&mut rng, -0.5, 0.5) as f32 / dim as f32)
        .collect();
    let mut output = vec![0.0f32; rows * dim];

    let total_tokens: usize = ids.iter().map(Vec::len).sum();
    let total_steps = (total_tokens * config.epochs).max(1) as f64;
    let mut step = 0usize;

    let k = config.negatives;
    let mut d_center = vec![0.0f32; dim];
    let mut d_positive = vec![0.0f32; dim];
    let mut d_negatives = vec![vec![0.0f32; dim]; k];
    let mut negative_ids = vec![0usize; k];

    for _ in 0..config.epochs {
        for sentence in &ids {
            for (i, &center) in sentence.iter().enumerate() {
                let progress = step as f64 / total_steps;
                let lr = (config.learning_rate * (1.0 - progress)).max(config.learning_rate * 1e-4) as f32;
                step += 1;
                let radius = rng.random_range(1..=config.window);
                let lo = i.saturating_sub(radius);
                let hi = (i + radius + 1).min(sentence.len());
                for (j, &context) in sentence.iter().enumerate().take(hi).skip(lo) {
                    if j == i {
                        continue;
                    }
                    for slot in negative_ids.iter_mut() {
                        let u = rng.random::<f64>();
                        *slot = noise_cdf.partition_point(|&c| c < u).min(rows - 1);
                    }
                    let v = &input[center * dim..(center + 1) * dim];
                    let pos = &output[context * dim..(context + 1) * dim];
                    let negs: Vec<&[f32]> = negative_ids
                        .iter()
                        .map(|&n| &output[n * dim..(n + 1) * dim])
                        .collect();
                    negative_sampling_grad(v, pos, &negs, &mut d_center, &mut d_positive, &mut d_negatives);
                    nn::axpy(-lr, &d_positive, &mut output[context * dim..(context + 1) * dim]);
                    for (&n, d) in negative_ids.iter().zip(&d_negatives) {
                        // A sampled negative equal to the positive target is skipped.
                        if n != context {
                            nn::axpy(-lr, d, &mut output[n * dim..(n + 1) * dim]);
                        }
                    }
                    nn::axpy(-lr, &d_center, &mut input[center * dim..(center + 1) * dim]);
                }
            }
        }
    }

    let words = kept.iter().map(|(w, _)| String::from(*w)).collect();
    StaticEmbeddingTable::from_rows(dim, words, input, config.normalize)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    #[test]
    fn empty_corpus_is_an_error() {
        assert_eq!(
            train_static_embeddings(&[], &SkipGramConfig::default()).unwrap_err(),
            Error::EmptyCorpus
        );
        assert_eq!(
            train_static_embeddings(&["  ".into()], &SkipGramConfig::default()).unwrap_err(),
            Error::EmptyCorpus
        );
    }

    #[test]
    fn rare_words_fold_into_unk() {
        let corpus: Vec<String> = (0..5).map(|i| format!("take the pill number{i}")).collect();
        let table = train_static_embeddings(&corpus, &SkipGramConfig { dim: 8, ..Default::default() }).unwrap();
        assert!(table.contains("pill"));
        assert!(!table.contains("number3"));
        assert_eq!(table.len(), 3);
    }

    #[test]
    fn deterministic_under_seed() {
        let corpus: Vec<String> = (0..30).map(|i| format!("patient {} took drug {}", i % 4, i % 3)).collect();
        let cfg = SkipGramConfig { dim: 8, min_count: 1, ..Default::default() };
        assert_eq!(
            train_static_embeddings(&corpus, &cfg).unwrap(),
            train_static_embeddings(&corpus, &cfg).unwrap()
        );
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = SkipGramConfig { window: 0, ..Default::default() };
        assert!(matches!(train_static_embeddings(&["a b".into()], &cfg), Err(Error::InvalidConfig(_))));
    }
}
