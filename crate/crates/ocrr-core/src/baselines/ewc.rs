//! Elastic weight consolidation: a diagonal-Fisher-weighted L2 penalty that
//! anchors the head to its seed-trained parameters while corrections stream
//! in.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::system::{StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::VoteError;

use super::linear::{seed_train, softmax, LinearHead, SEED_EPOCHS, SEED_LR};

/// Per-parameter non-negative curvature estimates, same shape as the head.
#[derive(Debug, Clone)]
pub struct FisherDiagonal {
    pub weights: Vec<f32>,
    pub bias: Vec<f32>,
}

impl FisherDiagonal {
    pub fn zeros(head: &LinearHead) -> Self {
        Self {
            weights: vec![0.0; head.weights().len()],
            bias: vec![0.0; head.bias().len()],
        }
    }

    pub fn parameter_count(&self) -> u64 {
        (self.weights.len() + self.bias.len()) as u64
    }
}

/// Empirical diagonal Fisher at the seed-trained head: the mean of squared
/// CE gradients over `n` draws from the seed samples.
pub fn fisher_estimate(
    head: &LinearHead,
    seed_samples: &[LabeledExample],
    n: usize,
    rng: &mut ChaCha12Rng,
) -> FisherDiagonal {
    let mut fisher = FisherDiagonal::zeros(head);
    if seed_samples.is_empty() || n == 0 {
        return fisher;
    }
    let dim = head.dim();
    for _ in 0..n {
        let sample = &seed_samples[rng.gen_range(0..seed_samples.len())];
        let x = sample.embedding.as_slice();
        let y = head.class_row(&sample.label).expect("seed label known");
        let mut delta = softmax(&head.logits(x));
        delta[y] -= 1.0;
        // (delta_c * x_j)^2 factors into delta_c^2 * x_j^2.
        for (c, &d) in delta.iter().enumerate() {
            let d2 = d * d;
            let row = &mut fisher.weights[c * dim..(c + 1) * dim];
            for (f, &xi) in row.iter_mut().zip(x) {
                *f += d2 * xi * xi;
            }
            fisher.bias[c] += d2;
        }
    }
    let inv = 1.0 / n as f32;
    for f in fisher.weights.iter_mut().chain(fisher.bias.iter_mut()) {
        *f *= inv;
    }
    fisher
}

/// One step on `CE + (lambda/2) * sum(F * (theta - theta0)^2)`.
pub fn ewc_step(
    head: &mut LinearHead,
    x: &[f32],
    label: &str,
    lr: f32,
    lambda: f32,
    fisher: &FisherDiagonal,
    anchor: &LinearHead,
) {
    let y = head.class_row(label).expect("label pre-allocated");
    let mut delta = softmax(&head.logits(x));
    delta[y] -= 1.0;
    let dim = head.dim();
    let classes = head.num_classes();
    for c in 0..classes {
        let g = delta[c];
        let anchor_row = anchor.row(c);
        let fisher_row = &fisher.weights[c * dim..(c + 1) * dim];
        {
            let head_bias = head.bias()[c];
            let penalty_b = lambda * fisher.bias[c] * (head_bias - anchor.bias()[c]);
            let (w, b) = head.weights_mut();
            let row = &mut w[c * dim..(c + 1) * dim];
            for j in 0..dim {
                let penalty = lambda * fisher_row[j] * (row[j] - anchor_row[j]);
                row[j] -= lr * (g * x[j] + penalty);
            }
            b[c] -= lr * (g + penalty_b);
        }
    }
}

/// The EWC loss for a single correction, used by finite-difference oracles.
pub fn ewc_loss(
    head: &LinearHead,
    x: &[f32],
    label: &str,
    lambda: f32,
    fisher: &FisherDiagonal,
    anchor: &LinearHead,
) -> f64 {
    let mut penalty = 0.0f64;
    for ((&theta, &theta0), &f) in head
        .weights()
        .iter()
        .zip(anchor.weights())
        .zip(&fisher.weights)
    {
        let d = theta as f64 - theta0 as f64;
        penalty += f as f64 * d * d;
    }
    for ((&theta, &theta0), &f) in head.bias().iter().zip(anchor.bias()).zip(&fisher.bias) {
        let d = theta as f64 - theta0 as f64;
        penalty += f as f64 * d * d;
    }
    head.ce_loss(x, label) + 0.5 * lambda as f64 * penalty
}

pub struct EwcSystem {
    head: LinearHead,
    anchor: Option<LinearHead>,
    fisher: Option<FisherDiagonal>,
    lr: f32,
    lambda: f32,
    fisher_samples: usize,
    base_seed: u64,
}

impl EwcSystem {
    pub fn new(
        class_order: Vec<ClassLabel>,
        dim: usize,
        lr: f32,
        lambda: f32,
        fisher_samples: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            head: LinearHead::zeros(class_order, dim),
            anchor: None,
            fisher: None,
            lr,
            lambda,
            fisher_samples,
            base_seed,
        }
    }
}

impl System for EwcSystem {
    fn name(&self) -> &str {
        "ewc"
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
        let mut fisher_rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "fisher"));
        self.fisher = Some(fisher_estimate(
            &self.head,
            seed_set,
            self.fisher_samples,
            &mut fisher_rng,
        ));
        self.anchor = Some(self.head.clone());
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        Ok(self.head.predict(query.as_slice()).clone())
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        let (Some(fisher), Some(anchor)) = (self.fisher.as_ref(), self.anchor.as_ref()) else {
            self.head.ce_sgd_step(embedding.as_slice(), label, self.lr);
            return;
        };
        ewc_step(
            &mut self.head,
            embedding.as_slice(),
            label,
            self.lr,
            self.lambda,
            fisher,
            anchor,
        );
    }

    fn footprint(&self) -> StorageFootprint {
        let mut parameters = self.head.parameter_count();
        if let Some(anchor) = &self.anchor {
            parameters += anchor.parameter_count();
        }
        if let Some(fisher) = &self.fisher {
            parameters += fisher.parameter_count();
        }
        StorageFootprint {
            entries: 0,
            parameters,
            bytes: parameters * 4,
        }
    }
}
