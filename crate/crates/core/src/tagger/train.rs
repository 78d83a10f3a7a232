use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::model::NerModel;
use super::scheme::{document_actions, Action};
use crate::corpus::Dataset;
use crate::error::{Error, Result};
use crate::nn::{self, Adam};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub iterations: usize,
    pub dropout: f64,
    /// Documents per optimizer step.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            iterations: 100,
            dropout: 0.2,
            batch_size: 8,
            learning_rate: 1e-3,
            seed: 0,
            shuffle: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("iterations and batch size must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidConfig("dropout must lie in [0, 1)".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidConfig("learning rate must be positive".into()));
        }
        Ok(())
    }
}

/// Train a copy of `base` on `data` with teacher-forced, legality-masked
/// cross-entropy. The representation stays frozen; only the scorer learns.
pub fn train(base: &NerModel, data: &Dataset, config: &TrainConfig) -> Result<NerModel> {
    train_observed(base, data, config, &mut |_, _| {})
}

/// [`train`], calling `observe(iteration, mean_token_loss)` after each pass.
pub fn train_observed(
    base: &NerModel,
    data: &Dataset,
    config: &TrainConfig,
    observe: &mut dyn FnMut(usize, f64),
) -> Result<NerModel> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let examples: Vec<(Vec<f32>, Vec<Action>)> = data
        .documents
        .iter()
        .filter(|d| !d.tokens.is_empty())
        .map(|d| Ok((base.features(&d.tokens), document_actions(d, &base.scheme)?)))
        .collect::<Result<_>>()?;
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut model = base.clone();
    let mut grads = model.scorer.zeros_like();
    let mut adam = Adam::<f32>::new(config.learning_rate, model.scorer.params().iter().map(|p| p.len()));
    let mut rng = rng::derive(config.seed, 41);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut scratch = model.scorer.scratch();
    let mut drop = Vec::new();
    let f = model.scorer.feature_dim;

    for iteration in 0..config.iterations {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut total = 0.0f64;
        let mut tokens = 0usize;
        for batch in order.chunks(config.batch_size) {
            for p in grads.params_mut() {
                p.fill(0.0);
            }
            let mut batch_tokens = 0usize;
            for &e in batch {
                let (features, gold) = &examples[e];
                let d = if config.dropout > 0.0 {
                    drop.resize(gold.len() * f, 0.0f32);
                    nn::dropout_mask(config.dropout, &mut rng, &mut drop);
                    Some(drop.as_slice())
                } else {
                    None
                };
                let loss = model
                    .scorer
                    .sequence_loss(features, gold, &model.scheme, d, Some(&mut grads), &mut scratch);
                total += loss as f64;
                batch_tokens += gold.len();
            }
            tokens += batch_tokens;
            let scale = 1.0 / batch_tokens.max(1) as f32;
            adam.update(model.scorer.params_mut(), grads.params(), scale);
        }
        observe(iteration, total / tokens.max(1) as f64);
    }
    Ok(model)
}

/// Grow `base` with `new_labels` without training: every existing action's
/// weights are copied and the new rows are initialized from `seed`.
pub fn extend_labels<S: AsRef<str>>(base: &NerModel, new_labels: &[S], seed: u64) -> Result<NerModel> {
    let scheme = base.scheme.extend(new_labels)?;
    let mut scorer = base.scorer.clone();
    let extra = scheme.action_count() - base.scheme.action_count();
    scorer.grow_actions(extra, &mut rng::derive(seed, 51));
    Ok(NerModel {
        scheme,
        repr: base.repr.clone(),
        scorer,
        config: base.config,
    })
}

/// Extend `base` with `new_labels`, then train on `data`.
pub fn fine_tune_extend<S: AsRef<str>>(
    base: &NerModel,
    new_labels: &[S],
    data: &Dataset,
    config: &TrainConfig,
) -> Result<NerModel> {
    let extended = extend_labels(base, new_labels, config.seed)?;
    train(&extended, data, config)
}

/// Labels used by `data` that `base` does not know, in label-set order.
pub fn missing_labels(base: &NerModel, data: &Dataset) -> Vec<String> {
    data.label_set
        .iter()
        .filter(|l| base.scheme.label_index(l).is_none())
        .cloned()
        .collect()
}
