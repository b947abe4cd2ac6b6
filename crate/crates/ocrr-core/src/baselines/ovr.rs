//! One-vs-rest online logistic regression: C independent binary regressors,
//! each updated on every correction (target 1 for the true class, 0 for the
//! rest), seeded with a single online pass over a bounded subsample.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{dot, ClassLabel, EmbeddingVector};
use crate::system::{StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::VoteError;

use std::collections::HashMap;

fn sigmoid(z: f32) -> f32 {
    1.0 / (1.0 + (-z).exp())
}

#[derive(Clone)]
pub struct OvrLogReg {
    class_order: Vec<ClassLabel>,
    class_index: HashMap<ClassLabel, usize>,
    dim: usize,
    /// C×d, row-major.
    weights: Vec<f32>,
    bias: Vec<f32>,
}

impl OvrLogReg {
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

    pub fn parameter_count(&self) -> u64 {
        (self.weights.len() + self.bias.len()) as u64
    }

    fn row(&self, class: usize) -> &[f32] {
        &self.weights[class * self.dim..(class + 1) * self.dim]
    }

    pub fn score(&self, class: usize, x: &[f32]) -> f32 {
        sigmoid(dot(self.row(class), x) + self.bias[class])
    }

    /// Binary cross-entropy of regressor `class` against `target`, in f64
    /// via the stable log1p(exp) form; finite-difference oracles probe this.
    pub fn binary_ce_loss(&self, class: usize, x: &[f32], target: f32) -> f64 {
        let z = (dot(self.row(class), x) + self.bias[class]) as f64;
        let t = target as f64;
        z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
    }

    /// Trains every regressor on one example: target 1 for the true class,
    /// 0 otherwise.
    pub fn update(&mut self, x: &[f32], label: &str, lr: f32) {
        let y = self.class_index[label];
        for c in 0..self.num_classes() {
            let target = if c == y { 1.0 } else { 0.0 };
            let p = sigmoid(dot(self.row(c), x) + self.bias[c]);
            let g = p - target;
            let scale = lr * g;
            let row = &mut self.weights[c * self.dim..(c + 1) * self.dim];
            for (w, &xi) in row.iter_mut().zip(x) {
                *w -= scale * xi;
            }
            self.bias[c] -= scale;
        }
    }

    /// Per-parameter mutable access for finite-difference probes.
    pub fn weights_mut(&mut self) -> (&mut [f32], &mut [f32]) {
        (&mut self.weights, &mut self.bias)
    }

    /// Argmax of per-class sigmoid scores; ties go to the smaller row.
    pub fn predict(&self, x: &[f32]) -> &ClassLabel {
        let mut best = 0usize;
        let mut best_score = f32::NEG_INFINITY;
        for c in 0..self.num_classes() {
            let s = self.score(c, x);
            if s > best_score {
                best_score = s;
                best = c;
            }
        }
        &self.class_order[best]
    }
}

pub struct OvrSystem {
    model: OvrLogReg,
    lr: f32,
    seed_subsample: usize,
    base_seed: u64,
}

impl OvrSystem {
    pub fn new(
        class_order: Vec<ClassLabel>,
        dim: usize,
        lr: f32,
        seed_subsample: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            model: OvrLogReg::zeros(class_order, dim),
            lr,
            seed_subsample,
            base_seed,
        }
    }

    pub fn model(&self) -> &OvrLogReg {
        &self.model
    }
}

impl System for OvrSystem {
    fn name(&self) -> &str {
        "ovr_logreg"
    }

    /// One online pass over a seeded subsample of the seed set.
    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "subsample"));
        let mut order: Vec<usize> = (0..seed_set.len()).collect();
        order.shuffle(&mut rng);
        order.truncate(self.seed_subsample);
        for &i in &order {
            let example = &seed_set[i];
            self.model
                .update(example.embedding.as_slice(), &example.label, self.lr);
        }
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        Ok(self.model.predict(query.as_slice()).clone())
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        self.model.update(embedding.as_slice(), label, self.lr);
    }

    fn footprint(&self) -> StorageFootprint {
        let parameters = self.model.parameter_count();
        StorageFootprint {
            entries: 0,
            parameters,
            bytes: parameters * 4,
        }
    }
}
