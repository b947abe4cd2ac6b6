//! The shared linear softmax head: a C×d weight matrix plus bias, with rows
//! for every corpus class allocated up front (held-out classes start at
//! zero). All gradient-bearing baselines update through this head.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{dot, ClassLabel, EmbeddingVector};
use crate::system::{StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::VoteError;

/// Seed-phase defaults shared by every linear-head system.
pub const SEED_EPOCHS: usize = 30;
pub const SEED_LR: f32 = 0.05;

/// Numerically stable softmax.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    softmax_with_temperature(logits, 1.0)
}

pub fn softmax_with_temperature(logits: &[f32], temperature: f32) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let mut out: Vec<f32> = logits
        .iter()
        .map(|z| ((z - max) / temperature).exp())
        .collect();
    let sum: f32 = out.iter().sum();
    for p in &mut out {
        *p /= sum;
    }
    out
}

#[derive(Debug, Clone)]
pub struct LinearHead {
    class_order: Vec<ClassLabel>,
    class_index: HashMap<ClassLabel, usize>,
    dim: usize,
    /// C×d, row-major.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl LinearHead {
    /// Zero-initialized head over the full class list. The problem is convex
    /// in (W, b), so zero init removes an unreported degree of freedom.
    pub fn zeros(class_order: Vec<ClassLabel>, dim: usize) -> Self {
        let class_index = class_order
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        let c = class_order.len();
        Self {
            class_order,
            class_index,
            dim,
            weights: vec![0.0; c * dim],
            bias: vec![0.0; c],
        }
    }

    pub fn num_classes(&self) -> usize {
        self.class_order.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn class_order(&self) -> &[ClassLabel] {
        &self.class_order
    }

    pub fn class_row(&self, label: &str) -> Option<usize> {
        self.class_index.get(label).copied()
    }

    pub fn parameter_count(&self) -> u64 {
        (self.weights.len() + self.bias.len()) as u64
    }

    pub fn row(&self, class: usize) -> &[f32] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn bias(&self) -> &[f32] {
        &self.bias
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    /// Test-only mutable access for finite-difference probes.
    pub fn weights_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.weights, &mut self.bias)
    }

    pub fn logits(&self, x: &[f32]) -> Vec<f32> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.num_classes())
            .map(|c| dot(self.row(c), x) + self.bias[c])
            .collect()
    }

    /// Argmax row; ties go to the smaller row index.
    pub fn predict_row(&self, x: &[f32]) -> usize {
        let logits = self.logits(x);
        let mut best = 0;
        for (c, z) in logits.iter().enumerate().skip(1) {
            if *z > logits[best] {
                best = c;
            }
        }
        best
    }

    pub fn predict(&self, x: &[f32]) -> &ClassLabel {
        &self.class_order[self.predict_row(x)]
    }

    /// Argmax over a subset of rows (the frozen baseline only ever answers
    /// with seed classes).
    pub fn predict_restricted(&self, x: &[f32], allowed: &[bool]) -> &ClassLabel {
        debug_assert_eq!(allowed.len(), self.num_classes());
        let logits = self.logits(x);
        let mut best: Option<usize> = None;
        for c in 0..logits.len() {
            if !allowed[c] {
                continue;
            }
            match best {
                Some(b) if logits[c] <= logits[b] => {}
                _ => best = Some(c),
            }
        }
        &self.class_order[best.expect("at least one allowed row")]
    }

    /// Softmax cross-entropy loss, evaluated in f64 so finite-difference
    /// oracles stay accurate at f32 parameter precision.
    pub fn ce_loss(&self, x: &[f32], label: &str) -> f64 {
        let y = self.class_index[label];
        let logits = self.logits(x);
        let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
        let log_sum: f64 = logits
            .iter()
            .map(|&z| ((z as f64) - max).exp())
            .sum::<f64>()
            .ln()
            + max;
        log_sum - logits[y] as f64
    }

    /// `W[c] -= lr * grad[c] * x`, `b[c] -= lr * grad[c]` for a per-class
    /// logit gradient.
    pub(crate) fn apply_logit_gradient(&mut self, x: &[f32], logit_grad: &[f32], lr: f32) {
        let dim = self.dim;
        for (c, &g) in logit_grad.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            let scale = lr * g;
            let row = &mut self.weights[c * dim..(c + 1) * dim];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w -= scale * xi;
            }
            self.bias[c] -= scale;
        }
    }

    /// One softmax cross-entropy SGD step (no momentum).
    pub fn ce_sgd_step(&mut self, x: &[f32], label: &str, lr: f32) {
        let y = self.class_index[label];
        let mut grad = softmax(&self.logits(x));
        grad[y] -= 1.0;
        self.apply_logit_gradient(x, &grad, lr);
    }
}

/// Shuffled full passes of `ce_sgd_step` over the seed set; initializes every
/// linear-head system and the hybrid's parametric tier.
pub fn seed_train(
    head: &mut LinearHead,
    seed_set: &[LabeledExample],
    epochs: usize,
    lr: f32,
    rng: &mut ChaCha12Rng,
) {
    let mut order: Vec<usize> = (0..seed_set.len()).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for &i in &order {
            let example = &seed_set[i];
            head.ce_sgd_step(example.embedding.as_slice(), &example.label, lr);
        }
    }
}

/// Frozen softmax head over the seed classes: seed-trained once, never
/// updated, and restricted to seed-class outputs.
pub struct StaticLinear {
    head: LinearHead,
    allowed: Vec<bool>,
    base_seed: u64,
}

impl StaticLinear {
    pub fn new(class_order: Vec<ClassLabel>, dim: usize, base_seed: u64) -> Self {
        let c = class_order.len();
        Self {
            head: LinearHead::zeros(class_order, dim),
            allowed: vec![false; c],
            base_seed,
        }
    }

    pub fn head(&self) -> &LinearHead {
        &self.head
    }
}

impl System for StaticLinear {
    fn name(&self) -> &str {
        "static_linear"
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
        for example in seed_set {
            if let Some(row) = self.head.class_row(&example.label) {
                self.allowed[row] = true;
            }
        }
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        if !self.allowed.iter().any(|&a| a) {
            return Err(VoteError::NoEvidence);
        }
        Ok(self
            .head
            .predict_restricted(query.as_slice(), &self.allowed)
            .clone())
    }

    fn correct(&mut self, _embedding: &EmbeddingVector, _label: &ClassLabel) {}

    fn footprint(&self) -> StorageFootprint {
        let parameters = self.head.parameter_count();
        StorageFootprint {
            entries: 0,
            parameters,
            bytes: parameters * 4,
        }
    }
}

/// Seed-trained head plus one plain SGD step per correction.
pub struct OnlineLinear {
    head: LinearHead,
    lr: f32,
    base_seed: u64,
}

impl OnlineLinear {
    pub fn new(class_order: Vec<ClassLabel>, dim: usize, lr: f32, base_seed: u64) -> Self {
        Self {
            head: LinearHead::zeros(class_order, dim),
            lr,
            base_seed,
        }
    }

    pub fn head(&self) -> &LinearHead {
        &self.head
    }
}

impl System for OnlineLinear {
    fn name(&self) -> &str {
        "online_linear"
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        Ok(self.head.predict(query.as_slice()).clone())
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        self.head.ce_sgd_step(embedding.as_slice(), label, self.lr);
    }

    fn footprint(&self) -> StorageFootprint {
        let parameters = self.head.parameter_count();
        StorageFootprint {
            entries: 0,
            parameters,
            bytes: parameters * 4,
        }
    }
}

#[cfg(test)]
pub(crate) mod test_support {
    use super::*;
    use rand::Rng;

    pub fn toy_head(classes: usize, dim: usize, rng: &mut ChaCha12Rng) -> LinearHead {
        let class_order: Vec<ClassLabel> = (0..classes).map(|c| format!("c{c}")).collect();
        let mut head = LinearHead::zeros(class_order, dim);
        {
            let (w, b) = head.weights_mut();
            for v in w.iter_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
            for v in b.iter_mut() {
                *v = rng.gen_range(-0.5..0.5);
            }
        }
        head
    }

    pub fn random_unit(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f32> {
        let mut v: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
        let n = crate::embedding::l2_norm(&v);
        for c in &mut v {
            *c /= n;
        }
        v
    }

    /// Central finite differences of `loss` over 10 random parameter
    /// coordinates, compared against `analytic` (flattened W then b) at
    /// relative error `tol`.
    pub fn check_gradient(
        head: &mut LinearHead,
        loss: &dyn Fn(&LinearHead) -> f64,
        analytic: &[f32],
        rng: &mut ChaCha12Rng,
        tol: f64,
    ) {
        let n_w = head.weights().len();
        let n = n_w + head.bias().len();
        let h = 5e-3f32;
        for _ in 0..10 {
            let coord = rng.gen_range(0..n);
            let read = |head: &mut LinearHead, delta: f32| -> f64 {
                let (w, b) = head.weights_mut();
                let slot = if coord < n_w {
                    &mut w[coord]
                } else {
                    &mut b[coord - n_w]
                };
                let original = *slot;
                *slot = original + delta;
                let value = loss(head);
                let (w, b) = head.weights_mut();
                let slot = if coord < n_w {
                    &mut w[coord]
                } else {
                    &mut b[coord - n_w]
                };
                *slot = original;
                value
            };
            let plus = read(head, h);
            let minus = read(head, -h);
            let numeric = (plus - minus) / (2.0 * h as f64);
            let exact = analytic[coord] as f64;
            let scale = exact.abs().max(numeric.abs()).max(1e-4);
            assert!(
                (numeric - exact).abs() / scale < tol,
                "coord {coord}: numeric {numeric:.6e} vs analytic {exact:.6e}"
            );
        }
    }

    /// Analytic CE gradient flattened as (W rows, then b).
    pub fn ce_gradient_flat(head: &LinearHead, x: &[f32], label: &str) -> Vec<f32> {
        let y = head.class_row(label).unwrap();
        let mut delta = softmax(&head.logits(x));
        delta[y] -= 1.0;
        flatten_logit_gradient(head, x, &delta)
    }

    pub fn flatten_logit_gradient(head: &LinearHead, x: &[f32], delta: &[f32]) -> Vec<f32> {
        let dim = head.dim();
        let mut flat = Vec::with_capacity(head.weights().len() + head.bias().len());
        for &d in delta {
            for &xi in &x[..dim] {
                flat.push(d * xi);
            }
        }
        flat.extend_from_slice(delta);
        flat
    }
}
