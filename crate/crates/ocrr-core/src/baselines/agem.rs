//! Averaged gradient episodic memory: each correction gradient is projected
//! so it cannot increase loss on a reservoir of seed-task examples.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::system::{entry_bytes, StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::VoteError;

use super::linear::{seed_train, softmax, LinearHead, SEED_EPOCHS, SEED_LR};

/// Reservoir of seed-task examples used as the reference batch.
pub struct MemoryBuffer {
    capacity: usize,
    examples: Vec<LabeledExample>,
    seen: u64,
}

impl MemoryBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            examples: Vec::with_capacity(capacity),
            seen: 0,
        }
    }

    /// Algorithm R over the offered stream.
    pub fn offer(&mut self, example: &LabeledExample, rng: &mut ChaCha12Rng) {
        self.seen += 1;
        if self.examples.len() < self.capacity {
            self.examples.push(example.clone());
            return;
        }
        let draw = rng.gen_range(0..self.seen);
        if draw < self.capacity as u64 {
            self.examples[draw as usize] = example.clone();
        }
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn examples(&self) -> &[LabeledExample] {
        &self.examples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgemOutcome {
    /// Reference agreement: the plain gradient was applied.
    Plain,
    /// Conflict with memory: the projected gradient was applied.
    Projected,
    /// Memory empty; fell back to a plain CE step.
    EmptyMemoryFallback,
}

/// Projects `g` onto the half-space that does not increase memory loss:
/// when g . g_ref < 0, g <- g - (g . g_ref / g_ref . g_ref) g_ref.
/// Returns true when a projection happened.
pub fn project_gradient(g: &mut [f32], g_ref: &[f32]) -> bool {
    debug_assert_eq!(g.len(), g_ref.len());
    let mut dot = 0.0f64;
    let mut ref_sq = 0.0f64;
    for (a, b) in g.iter().zip(g_ref) {
        dot += *a as f64 * *b as f64;
        ref_sq += *b as f64 * *b as f64;
    }
    if dot >= 0.0 || ref_sq == 0.0 {
        return false;
    }
    let alpha = (dot / ref_sq) as f32;
    for (a, b) in g.iter_mut().zip(g_ref) {
        *a -= alpha * b;
    }
    true
}

fn ce_gradient_flat(head: &LinearHead, x: &[f32], label: &str) -> Vec<f32> {
    let y = head.class_row(label).expect("label pre-allocated");
    let mut delta = softmax(&head.logits(x));
    delta[y] -= 1.0;
    let dim = head.dim();
    let mut flat = Vec::with_capacity(head.weights().len() + head.bias().len());
    for &d in &delta {
        for &xi in &x[..dim] {
            flat.push(d * xi);
        }
    }
    flat.extend_from_slice(&delta);
    flat
}

fn apply_flat_gradient(head: &mut LinearHead, flat: &[f32], lr: f32) {
    let n_w = head.weights().len();
    let (w, b) = head.weights_mut();
    for (theta, g) in w.iter_mut().zip(&flat[..n_w]) {
        *theta -= lr * g;
    }
    for (theta, g) in b.iter_mut().zip(&flat[n_w..]) {
        *theta -= lr * g;
    }
}

/// One A-GEM step: correction gradient, mean gradient over a sampled memory
/// batch, projection on conflict, then the SGD update.
pub fn agem_step(
    head: &mut LinearHead,
    x: &[f32],
    label: &str,
    lr: f32,
    memory: &MemoryBuffer,
    batch_size: usize,
    rng: &mut ChaCha12Rng,
) -> AgemOutcome {
    if memory.is_empty() {
        head.ce_sgd_step(x, label, lr);
        return AgemOutcome::EmptyMemoryFallback;
    }
    let mut g = ce_gradient_flat(head, x, label);
    let batch = batch_size.min(memory.len());
    let picks = rand::seq::index::sample(rng, memory.len(), batch);
    let mut g_ref = vec![0.0f32; g.len()];
    for i in picks {
        let example = &memory.examples()[i];
        let sample_grad = ce_gradient_flat(head, example.embedding.as_slice(), &example.label);
        for (acc, v) in g_ref.iter_mut().zip(&sample_grad) {
            *acc += v;
        }
    }
    let inv = 1.0 / batch as f32;
    for v in &mut g_ref {
        *v *= inv;
    }
    let projected = project_gradient(&mut g, &g_ref);
    apply_flat_gradient(head, &g, lr);
    if projected {
        AgemOutcome::Projected
    } else {
        AgemOutcome::Plain
    }
}

pub struct AgemSystem {
    head: LinearHead,
    memory: MemoryBuffer,
    lr: f32,
    batch_size: usize,
    base_seed: u64,
    step_rng: Option<ChaCha12Rng>,
    fallback_steps: u64,
}

impl AgemSystem {
    pub fn new(
        class_order: Vec<ClassLabel>,
        dim: usize,
        lr: f32,
        memory_capacity: usize,
        batch_size: usize,
        base_seed: u64,
    ) -> Self {
        Self {
            head: LinearHead::zeros(class_order, dim),
            memory: MemoryBuffer::new(memory_capacity),
            lr,
            batch_size,
            base_seed,
            step_rng: None,
            fallback_steps: 0,
        }
    }

    /// Steps that ran without a memory batch (recorded in run metadata).
    pub fn fallback_steps(&self) -> u64 {
        self.fallback_steps
    }
}

impl System for AgemSystem {
    fn name(&self) -> &str {
        "a_gem"
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
        let mut memory_rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "memory"));
        for example in seed_set {
            self.memory.offer(example, &mut memory_rng);
        }
        self.step_rng = Some(ChaCha12Rng::seed_from_u64(derive_seed(
            self.base_seed,
            "batch",
        )));
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        Ok(self.head.predict(query.as_slice()).clone())
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        let mut rng = self
            .step_rng
            .take()
            .unwrap_or_else(|| ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "batch")));
        let outcome = agem_step(
            &mut self.head,
            embedding.as_slice(),
            label,
            self.lr,
            &self.memory,
            self.batch_size,
            &mut rng,
        );
        self.step_rng = Some(rng);
        if outcome == AgemOutcome::EmptyMemoryFallback {
            self.fallback_steps += 1;
        }
    }

    fn footprint(&self) -> StorageFootprint {
        let parameters = self.head.parameter_count();
        let entry_bytes_total: u64 = self
            .memory
            .examples()
            .iter()
            .map(|e| entry_bytes(e.embedding.dim(), &e.label))
            .sum();
        StorageFootprint {
            entries: self.memory.len() as u64,
            parameters,
            bytes: parameters * 4 + entry_bytes_total,
        }
    }

    fn run_metadata(&self) -> Option<String> {
        (self.fallback_steps > 0)
            .then(|| format!("{} steps ran without a memory batch", self.fallback_steps))
    }
}
