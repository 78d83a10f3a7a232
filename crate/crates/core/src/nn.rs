//! Small dense-network building blocks, generic over the float type so the
//! same code runs in `f32` for training and in `f64` for gradient checks.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use num_traits::Float;

use crate::rng::{self, Rng};

pub trait Real: Float + Debug + Default + Send + Sync + 'static {
    fn from_f64(x: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(self) -> f64 {
        self
    }
}

/// Fully connected layer `y = W x + b` with `W` stored row-major (`out × in`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub inputs: usize,
    pub outputs: usize,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weight: vec![T::zero(); inputs * outputs],
            bias: vec![T::zero(); outputs],
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init(inputs: usize, outputs: usize, rng: &mut Rng) -> Self {
        let mut layer = Self::zeros(inputs, outputs);
        let limit = libm::sqrt(6.0 / (inputs + outputs) as f64);
        for w in &mut layer.weight {
            *w = T::from_f64(rng::uniform(rng, -limit, limit));
        }
        layer
    }

    pub fn forward(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.inputs);
        debug_assert_eq!(y.len(), self.outputs);
        for (o, out) in y.iter_mut().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            *out = self.bias[o] + dot(row, x);
        }
    }

    /// Accumulate parameter gradients into `grad` and, when asked, the input
    /// gradient into `dx` (added, not overwritten).
    pub fn backward(&self, x: &[T], dy: &[T], grad: &mut Dense<T>, dx: Option<&mut [T]>) {
        for (o, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            grad.bias[o] = grad.bias[o] + g;
            axpy(g, x, &mut grad.weight[o * self.inputs..(o + 1) * self.inputs]);
        }
        if let Some(dx) = dx {
            for (o, &g) in dy.iter().enumerate() {
                if g == T::zero() {
                    continue;
                }
                axpy(g, &self.weight[o * self.inputs..(o + 1) * self.inputs], dx);
            }
        }
    }

    pub fn params(&self) -> [&[T]; 2] {
        [&self.weight, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut [T]; 2] {
        [&mut self.weight, &mut self.bias]
    }

    pub fn cast<U: Real>(&self) -> Dense<U> {
        Dense {
            inputs: self.inputs,
            outputs: self.outputs,
            weight: cast_vec(&self.weight),
            bias: cast_vec(&self.bias),
        }
    }
}

pub fn cast_vec<T: Real, U: Real>(v: &[T]) -> Vec<U> {
    v.iter().map(|x| U::from_f64(x.as_f64())).collect()
}

#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[inline]
pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * xi;
    }
}

pub fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

pub fn cosine<T: Real>(a: &[T], b: &[T]) -> T {
    let denom = norm(a) * norm(b);
    if denom == T::zero() {
        T::zero()
    } else {
        dot(a, b) / denom
    }
}

pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable `ln(sigmoid(x))`.
pub fn log_sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

/// Softmax restricted to the entries where `mask` is true; masked-out entries
/// get probability zero.
pub fn masked_softmax<T: Real>(scores: &[T], mask: &[bool], out: &mut [T]) {
    let max = scores
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&s, _)| s)
        .fold(T::neg_infinity(), T::max);
    let mut total = T::zero();
    for ((o, &s), &m) in out.iter_mut().zip(scores).zip(mask) {
        *o = if m { (s - max).exp() } else { T::zero() };
        total = total + *o;
    }
    for o in out.iter_mut() {
        *o = *o / total;
    }
}

/// Adam optimizer state for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    step: i32,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64, shapes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v): (Vec<_>, Vec<_>) = shapes
            .into_iter()
            .map(|n| (vec![T::zero(); n], vec![T::zero(); n]))
            .unzip();
        Adam {
            lr: T::from_f64(lr),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            step: 0,
            m,
            v,
        }
    }

    /// Apply one update. `scale` multiplies every gradient first (e.g. one
    /// over the batch size).
    pub fn update(&mut self, params: Vec<&mut [T]>, grads: Vec<&[T]>, scale: T) {
        assert_eq!(params.len(), self.m.len());
        self.step += 1;
        let bc1 = T::one() - self.beta1.powi(self.step);
        let bc2 = T::one() - self.beta2.powi(self.step);
        for (i, (p, g)) in params.into_iter().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..p.len() {
                let gj = g[j] * scale;
                m[j] = self.beta1 * m[j] + (T::one() - self.beta1) * gj;
                v[j] = self.beta2 * v[j] + (T::one() - self.beta2) * gj * gj;
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] = p[j] - self.lr * mh / (vh.sqrt() + self.eps);
            }
        }
    }
}

/// Fill `mask` with an inverted-dropout mask: zero with probability `rate`,
/// otherwise `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(rate: f64, rng: &mut Rng, mask: &mut [T]) {
    use rand::Rng as _;
    if rate <= 0.0 {
        mask.fill(T::one());
        return;
    }
    let keep = T::from_f64(1.0 / (1.0 - rate));
    for m in mask.iter_mut() {
        *m = if rng.random::<f64>() < rate { T::zero() } else { keep };
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masked_softmax_ignores_masked_entries() {
        let mut out = [0.0f64; 3];
        masked_softmax(&[1.0, 100.0, 1.0], &[true, false, true], &mut out);
        assert_eq!(out, [0.5, 0.0, 0.5]);
    }

    #[test]
    fn log_sigmoid_is_stable() {
        assert!((log_sigmoid(-800.0f64) + 800.0).abs() < 1e-9);
        assert!(log_sigmoid(800.0f64).abs() < 1e-12);
        assert!((log_sigmoid(0.3f64) - sigmoid(0.3f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn dense_backward_matches_forward_linearity() {
        let mut rng = rng::seeded(1);
        let layer: Dense<f64> = Dense::init(3, 2, &mut rng);
        let x = [0.5, -1.0, 2.0];
        let mut grad = Dense::zeros(3, 2);
        let mut dx = [0.0; 3];
        layer.backward(&x, &[1.0, 0.0], &mut grad, Some(&mut dx));
        assert_eq!(&grad.weight[..3], &x);
        assert_eq!(&dx, &layer.weight[..3]);
    }
}
