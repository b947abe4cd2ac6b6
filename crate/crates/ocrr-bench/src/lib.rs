//! Shared fixtures for the benchmark targets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use ocrr_core::corpus::{LabeledExample, Split};
use ocrr_core::embedding::{ClassLabel, EmbeddingVector};

/// Benchmark geometry mirrors the real-dataset setting: 1024-d embeddings,
/// 77-class heads.
pub const BENCH_DIM: usize = 1024;
pub const BENCH_CLASSES: usize = 77;

pub fn bench_classes() -> Vec<ClassLabel> {
    (0..BENCH_CLASSES).map(|c| format!("intent_{c:02}")).collect()
}

pub fn random_unit(rng: &mut ChaCha12Rng, dim: usize) -> Vec<f32> {
    let mut v: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
    let norm = ocrr_core::embedding::l2_norm(&v);
    for c in &mut v {
        *c /= norm;
    }
    v
}

pub fn random_examples(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let classes = bench_classes();
    (0..n)
        .map(|i| LabeledExample {
            embedding: EmbeddingVector::new(random_unit(&mut rng, BENCH_DIM)).unwrap(),
            label: classes[i % BENCH_CLASSES].clone(),
            split: Split::Train,
        })
        .collect()
}
