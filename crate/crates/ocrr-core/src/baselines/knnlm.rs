//! Retrieval/parametric hybrid: a frozen seed-trained head interpolated with
//! a class distribution derived from top-k datastore hits,
//! `p = lambda * p_knn + (1 - lambda) * p_param`. The datastore grows with
//! corrections; the head never moves after seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::index::{BruteIndex, VectorIndex};
use crate::ledger::Ledger;
use crate::system::{entry_bytes, StorageFootprint, System};
use crate::util::derive_seed;
use crate::vote::{Neighbor, VoteError};

use super::linear::{seed_train, softmax, LinearHead, SEED_EPOCHS, SEED_LR};

/// How hits of the same class combine into its retrieval score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassScore {
    /// Best similarity among the class's top-k hits (default reading).
    #[default]
    MaxSim,
    /// Sum of similarities over the class's top-k hits.
    SumSim,
}

#[derive(Debug, Clone, Copy)]
pub struct HybridConfig {
    pub lambda_knn: f32,
    pub tau: f32,
    pub class_score: ClassScore,
}

impl Default for HybridConfig {
    fn default() -> Self {
        Self {
            lambda_knn: 0.5,
            tau: 0.1,
            class_score: ClassScore::MaxSim,
        }
    }
}

/// Mixes the parametric softmax with the retrieval distribution. Classes
/// absent from the top-k carry zero retrieval mass before mixing; with an
/// empty neighbour list the mixture degenerates to the parametric tier.
pub fn knnlm_predict(
    head: &LinearHead,
    x: &[f32],
    neighbors: &[Neighbor<ClassLabel>],
    config: &HybridConfig,
) -> ClassLabel {
    let p_param = softmax(&head.logits(x));
    let classes = head.num_classes();
    let mut score: Vec<Option<f32>> = vec![None; classes];
    for n in neighbors {
        let row = head
            .class_row(&n.label)
            .expect("datastore labels are pre-allocated classes");
        score[row] = Some(match (score[row], config.class_score) {
            (None, _) => n.similarity,
            (Some(s), ClassScore::MaxSim) => s.max(n.similarity),
            (Some(s), ClassScore::SumSim) => s + n.similarity,
        });
    }
    let mut p_knn = vec![0.0f32; classes];
    let present: Vec<usize> = (0..classes).filter(|&c| score[c].is_some()).collect();
    if !present.is_empty() {
        let max = present
            .iter()
            .map(|&c| score[c].unwrap())
            .fold(f32::NEG_INFINITY, f32::max);
        let mut sum = 0.0f32;
        for &c in &present {
            let e = ((score[c].unwrap() - max) / config.tau).exp();
            p_knn[c] = e;
            sum += e;
        }
        for &c in &present {
            p_knn[c] /= sum;
        }
    }
    let lambda = config.lambda_knn;
    let mut best = 0usize;
    let mut best_p = f32::NEG_INFINITY;
    for c in 0..classes {
        let p = lambda * p_knn[c] + (1.0 - lambda) * p_param[c];
        if p > best_p {
            best_p = p;
            best = c;
        }
    }
    head.class_order()[best].clone()
}

pub struct KnnLmSystem {
    head: LinearHead,
    datastore: Ledger,
    index: BruteIndex,
    k: usize,
    config: HybridConfig,
    base_seed: u64,
    entry_bytes_total: u64,
}

impl KnnLmSystem {
    pub fn new(
        class_order: Vec<ClassLabel>,
        dim: usize,
        k: usize,
        config: HybridConfig,
        base_seed: u64,
    ) -> Self {
        Self {
            head: LinearHead::zeros(class_order, dim),
            datastore: Ledger::new(),
            index: BruteIndex::new(dim),
            k,
            config,
            base_seed,
            entry_bytes_total: 0,
        }
    }

    pub fn datastore(&self) -> &Ledger {
        &self.datastore
    }

    fn append(&mut self, embedding: &EmbeddingVector, label: &str) {
        let entry = self.datastore.append(embedding.clone(), label.to_string());
        let id = entry.index;
        self.entry_bytes_total += entry_bytes(embedding.dim(), label);
        self.index
            .insert(id, embedding.as_slice())
            .expect("datastore ids are sequential");
    }
}

impl System for KnnLmSystem {
    fn name(&self) -> &str {
        "knn_lm"
    }

    /// Seeds both tiers: the head is trained then frozen, and the seed set
    /// becomes the initial datastore so known classes stay retrievable.
    fn seed(&mut self, seed_set: &[LabeledExample]) {
        let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(self.base_seed, "seed_train"));
        seed_train(&mut self.head, seed_set, SEED_EPOCHS, SEED_LR, &mut rng);
        for example in seed_set {
            self.append(&example.embedding, &example.label);
        }
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        let neighbors: Vec<Neighbor<ClassLabel>> = if self.datastore.is_empty() {
            Vec::new()
        } else {
            self.index
                .top_k(query.as_slice(), self.k)
                .map_err(|_| VoteError::NoEvidence)?
                .into_iter()
                .map(|(id, similarity)| Neighbor {
                    label: self
                        .datastore
                        .entry(id)
                        .expect("index mirrors datastore")
                        .label
                        .clone(),
                    similarity,
                    index: id,
                })
                .collect()
        };
        Ok(knnlm_predict(
            &self.head,
            query.as_slice(),
            &neighbors,
            &self.config,
        ))
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        self.append(embedding, label);
    }

    fn footprint(&self) -> StorageFootprint {
        let parameters = self.head.parameter_count();
        StorageFootprint {
            entries: self.datastore.len() as u64,
            parameters,
            bytes: parameters * 4 + self.entry_bytes_total,
        }
    }
}
