//! Feed-forward action scorer conditioned on the previous transition.

use alloc::vec;
use alloc::vec::Vec;

use super::scheme::{Action, LabelScheme};
use super::transition::{valid_mask, TransitionState};
use crate::nn::{self, Dense, Real};
use crate::rng::{self, Rng};

/// `scores = W₂ tanh(W₁ [features; embed(prev)] + b₁) + b₂`
///
/// Row 0 of the previous-action table is the sentence start; action `a`
/// uses row `a + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionScorer<T> {
    pub feature_dim: usize,
    pub action_dim: usize,
    pub prev: Vec<T>,
    pub hidden: Dense<T>,
    pub output: Dense<T>,
}

pub(crate) fn prev_row(prev: Option<Action>) -> usize {
    prev.map_or(0, |a| a.index() + 1)
}

/// Reusable buffers for one scoring step.
#[derive(Debug, Clone)]
pub struct Scratch<T> {
    x: Vec<T>,
    h: Vec<T>,
    scores: Vec<T>,
    probs: Vec<T>,
    mask: Vec<bool>,
    dh: Vec<T>,
    dx: Vec<T>,
}

impl<T: Real> ActionScorer<T> {
    pub fn new(feature_dim: usize, hidden: usize, action_dim: usize, actions: usize, rng: &mut Rng) -> Self {
        let prev = (0..(actions + 1) * action_dim)
            .map(|_| T::from_f64(rng::uniform(rng, -0.1, 0.1)))
            .collect();
        ActionScorer {
            feature_dim,
            action_dim,
            prev,
            hidden: Dense::init(feature_dim + action_dim, hidden, rng),
            output: Dense::init(hidden, actions, rng),
        }
    }

    pub fn actions(&self) -> usize {
        self.output.outputs
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for p in z.params_mut() {
            p.fill(T::zero());
        }
        z
    }

    pub fn params(&self) -> Vec<&[T]> {
        let mut v: Vec<&[T]> = vec![&self.prev];
        v.extend(self.hidden.params());
        v.extend(self.output.params());
        v
    }

    pub fn params_mut(&mut self) -> Vec<&mut [T]> {
        let mut v: Vec<&mut [T]> = vec![&mut self.prev];
        v.extend(self.hidden.params_mut());
        v.extend(self.output.params_mut());
        v
    }

    pub fn cast<U: Real>(&self) -> ActionScorer<U> {
        ActionScorer {
            feature_dim: self.feature_dim,
            action_dim: self.action_dim,
            prev: nn::cast_vec(&self.prev),
            hidden: self.hidden.cast(),
            output: self.output.cast(),
        }
    }

    pub fn scratch(&self) -> Scratch<T> {
        let n = self.actions();
        Scratch {
            x: vec![T::zero(); self.feature_dim + self.action_dim],
            h: vec![T::zero(); self.hidden.outputs],
            scores: vec![T::zero(); n],
            probs: vec![T::zero(); n],
            mask: vec![false; n],
            dh: vec![T::zero(); self.hidden.outputs],
            dx: vec![T::zero(); self.feature_dim + self.action_dim],
        }
    }

    fn load_input(&self, features: &[T], drop: Option<&[T]>, prev: Option<Action>, s: &mut Scratch<T>) {
        let f = self.feature_dim;
        match drop {
            Some(d) => {
                for ((x, &v), &m) in s.x[..f].iter_mut().zip(features).zip(d) {
                    *x = v * m;
                }
            }
            None => s.x[..f].copy_from_slice(features),
        }
        let r = prev_row(prev) * self.action_dim;
        s.x[f..].copy_from_slice(&self.prev[r..r + self.action_dim]);
    }

    fn forward(&self, s: &mut Scratch<T>) {
        self.hidden.forward(&s.x, &mut s.h);
        s.h.iter_mut().for_each(|v| *v = v.tanh());
        self.output.forward(&s.h, &mut s.scores);
    }

    /// Scores of every action for one token.
    pub fn score(&self, features: &[T], prev: Option<Action>, s: &mut Scratch<T>, out: &mut [T]) {
        self.load_input(features, None, prev, s);
        self.forward(s);
        out.copy_from_slice(&s.scores);
    }

    /// Teacher-forced cross-entropy of `gold` over a sentence whose
    /// features are `n × feature_dim`, normalized over legal actions only.
    /// Accumulates gradients into `grads` when given.
    pub fn sequence_loss(
        &self,
        features: &[T],
        gold: &[Action],
        scheme: &LabelScheme,
        drop: Option<&[T]>,
        mut grads: Option<&mut Self>,
        s: &mut Scratch<T>,
    ) -> T {
        let f = self.feature_dim;
        let n = gold.len();
        let mut state = TransitionState::default();
        let mut prev = None;
        let mut loss = T::zero();
        for (i, &g) in gold.iter().enumerate() {
            let row = &features[i * f..(i + 1) * f];
            let d = drop.map(|d| &d[i * f..(i + 1) * f]);
            self.load_input(row, d, prev, s);
            self.forward(s);
            valid_mask(state, scheme, i + 1 == n, &mut s.mask);
            nn::masked_softmax(&s.scores, &s.mask, &mut s.probs);
            let gi = g.index();
            loss = loss - s.probs[gi].max(T::min_positive_value()).ln();
            if let Some(grads) = grads.as_deref_mut() {
                // dL/dscores = p - onehot(gold); zero on illegal actions.
                s.probs[gi] = s.probs[gi] - T::one();
                s.dh.fill(T::zero());
                self.output.backward(&s.h, &s.probs, &mut grads.output, Some(&mut s.dh));
                for (dh, &h) in s.dh.iter_mut().zip(&s.h) {
                    *dh = *dh * (T::one() - h * h);
                }
                s.dx.fill(T::zero());
                self.hidden.backward(&s.x, &s.dh, &mut grads.hidden, Some(&mut s.dx));
                let r = prev_row(prev) * self.action_dim;
                nn::axpy(T::one(), &s.dx[f..], &mut grads.prev[r..r + self.action_dim]);
            }
            state = state.apply(g);
            prev = Some(g);
        }
        loss
    }

    /// Append `extra` actions: new output rows are freshly initialized, new
    /// output biases are zero and new previous-action rows are random.
    pub fn grow_actions(&mut self, extra: usize, rng: &mut Rng) {
        let fresh: Dense<T> = Dense::init(self.hidden.outputs, extra, rng);
        self.output.weight.extend_from_slice(&fresh.weight);
        self.output.bias.extend(core::iter::repeat_n(T::zero(), extra));
        self.output.outputs += extra;
        for _ in 0..extra * self.action_dim {
            self.prev.push(T::from_f64(rng::uniform(rng, -0.1, 0.1)));
        }
    }

    /// Insert `count` zero-weight input columns after the existing features,
    /// so the scorer's outputs are unchanged until those weights train.
    pub fn grow_features(&mut self, count: usize) {
        let old_in = self.hidden.inputs;
        let new_in = old_in + count;
        let f = self.feature_dim;
        let mut weight = Vec::with_capacity(self.hidden.outputs * new_in);
        for row in self.hidden.weight.chunks(old_in) {
            weight.extend_from_slice(&row[..f]);
            weight.extend(core::iter::repeat_n(T::zero(), count));
            weight.extend_from_slice(&row[f..]);
        }
        self.hidden.weight = weight;
        self.hidden.inputs = new_in;
        self.feature_dim += count;
    }
}
