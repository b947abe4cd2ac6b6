//! Synthetic class-incremental corpora with known ground truth: per-class
//! unit centroids drawn from an isotropic Gaussian, samples perturbed with
//! controlled noise and renormalized. Everything is keyed by explicit seeds
//! so regeneration is byte-identical.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::embedding::{l2_norm, EmbeddingVector};
use crate::util::mix_seeds;

use super::{CorpusError, LabeledExample, Split, SyntheticSpec};

pub fn class_label(class: usize) -> String {
    format!("class_{class:03}")
}

/// Centroid of one class: a Gaussian draw normalized onto the unit sphere,
/// on an independent stream keyed by (centroid_seed, class).
pub fn class_centroid(spec: &SyntheticSpec, class: usize) -> Vec<f32> {
    let mut rng = ChaCha12Rng::seed_from_u64(mix_seeds(spec.centroid_seed, class as u64));
    loop {
        let mut v: Vec<f32> = (0..spec.dim)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let n = l2_norm(&v);
        if n > 1e-6 {
            for c in &mut v {
                *c /= n;
            }
            return v;
        }
    }
}

/// Per-class sample stream under a given sample seed.
pub fn sample_rng(sample_seed: u64, class: usize) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(mix_seeds(sample_seed, class as u64))
}

/// One sample: centroid plus isotropic noise, renormalized. With sigma = 0
/// the centroid is returned bit-exactly.
pub fn sample_around(centroid: &[f32], sigma: f32, rng: &mut ChaCha12Rng) -> Vec<f32> {
    if sigma == 0.0 {
        return centroid.to_vec();
    }
    let mut v: Vec<f32> = centroid
        .iter()
        .map(|c| {
            let noise: f32 = StandardNormal.sample(rng);
            c + sigma * noise
        })
        .collect();
    let n = l2_norm(&v);
    for c in &mut v {
        *c /= n;
    }
    v
}

/// Generates `samples_per_class` train examples per class.
pub fn generate_synthetic(
    spec: &SyntheticSpec,
    sample_seed: u64,
) -> Result<Vec<LabeledExample>, CorpusError> {
    generate_with_split(spec, sample_seed, spec.samples_per_class, Split::Train)
}

/// Generates a full corpus: train examples under `sample_seed` and test
/// examples per class under a derived stream, so the two never overlap.
pub fn generate_synthetic_split(
    spec: &SyntheticSpec,
    sample_seed: u64,
    test_per_class: usize,
) -> Result<Vec<LabeledExample>, CorpusError> {
    let mut corpus = generate_with_split(spec, sample_seed, spec.samples_per_class, Split::Train)?;
    let test_seed = mix_seeds(sample_seed, u64::MAX);
    corpus.extend(generate_with_split(spec, test_seed, test_per_class, Split::Test)?);
    Ok(corpus)
}

fn generate_with_split(
    spec: &SyntheticSpec,
    sample_seed: u64,
    per_class: usize,
    split: Split,
) -> Result<Vec<LabeledExample>, CorpusError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.num_classes * per_class);
    for class in 0..spec.num_classes {
        let centroid = class_centroid(spec, class);
        let label = class_label(class);
        let mut rng = sample_rng(sample_seed, class);
        for _ in 0..per_class {
            let v = sample_around(&centroid, spec.noise_sigma, &mut rng);
            out.push(LabeledExample {
                embedding: EmbeddingVector::new(v).expect("generated vectors are finite unit"),
                label: label.clone(),
                split,
            });
        }
    }
    Ok(out)
}
