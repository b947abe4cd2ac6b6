//! Learning without forgetting: corrections minimize CE plus a temperature-
//! scaled KL distillation term against a frozen teacher copy of the
//! seed-trained head.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::system::{StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::VoteError;

use super::linear::{seed_train, softmax, softmax_with_temperature, LinearHead, SEED_EPOCHS, SEED_LR};

/// One step on `CE(x, y) + lambda * T^2 * KL(softmax(teacher/T) || softmax(head/T))`.
/// The teacher is never updated.
pub fn lwf_step(
    head: &mut LinearHead,
    teacher: &LinearHead,
    x: &[f32],
    label: &str,
    lr: f32,
    lambda: f32,
    temperature: f32,
) {
    let y = head.class_row(label).expect("label pre-allocated");
    let logits = head.logits(x);
    let mut grad = softmax(&logits);
    grad[y] -= 1.0;
    // d/dz [lambda * T^2 * KL(p_t || softmax(z/T))] = lambda * T * (p_s - p_t)
    let p_student = softmax_with_temperature(&logits, temperature);
    let p_teacher = softmax_with_temperature(&teacher.logits(x), temperature);
    for ((g, ps), pt) in grad.iter_mut().zip(&p_student).zip(&p_teacher) {
        *g += lambda * temperature * (ps - pt);
    }
    head.apply_logit_gradient(x, &grad, lr);
}

/// The LwF loss for finite-difference oracles, evaluated in f64.
pub fn lwf_loss(
    head: &LinearHead,
    teacher: &LinearHead,
    x: &[f32],
    label: &str,
    lambda: f32,
    temperature: f32,
) -> f64 {
    let t = temperature as f64;
    let p_teacher = softmax_with_temperature(&teacher.logits(x), temperature);
    let logits = head.logits(x);
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let log_sum = logits
        .iter()
        .map(|&z| ((z as f64) - max) / t)
        .map(f64::exp)
        .sum::<f64>()
        .ln();
    let mut kl = 0.0f64;
    for (c, &pt) in p_teacher.iter().enumerate() {
        if pt <= 0.0 {
            continue;
        }
        let pt = pt as f64;
        let log_ps = ((logits[c] as f64) - max) / t - log_sum;
        kl += pt * (pt.ln() - log_ps);
    }
    head.ce_loss(x, label) + lambda as f64 * t * t * kl
}

pub struct LwfSystem {
    head: LinearHead,
    teacher: Option<LinearHead>,
    lr: f32,
    lambda: f32,
    temperature: f32,
    base_seed: u64,
}

impl LwfSystem {
    pub fn new(
        class_order: Vec<ClassLabel>,
        dim: usize,
        lr: f32,
        lambda: f32,
        temperature: f32,
        base_seed: u64,
    ) -> Self {
        Self {
            head: LinearHead::zeros(class_order, dim),
            teacher: None,
            lr,
            lambda,
            temperature,
            base_seed,
        }
    }
}

impl System for LwfSystem {
    fn name(&self) -> &str {
        "lwf"
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
        self.teacher = Some(self.head.clone());
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        Ok(self.head.predict(query.as_slice()).clone())
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        match self.teacher.as_ref() {
            Some(teacher) => lwf_step(
                &mut self.head,
                teacher,
                embedding.as_slice(),
                label,
                self.lr,
                self.lambda,
                self.temperature,
            ),
            None => self.head.ce_sgd_step(embedding.as_slice(), label, self.lr),
        }
    }

    fn footprint(&self) -> StorageFootprint {
        let mut parameters = self.head.parameter_count();
        if let Some(teacher) = &self.teacher {
            parameters += teacher.parameter_count();
        }
        StorageFootprint {
            entries: 0,
            parameters,
            bytes: parameters * 4,
        }
    }
}
