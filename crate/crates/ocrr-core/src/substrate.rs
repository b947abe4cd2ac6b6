//! The retrieval substrate: a hash-chained ledger classified by top-k
//! retrieval plus margin-band voting. Learning is appending; there is no
//! parametric state to forget.

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::index::{build_index, HnswParams, IndexKind, VectorIndex};
use crate::ledger::{Ledger, LedgerError};
use crate::system::{entry_bytes, StorageFootprint, System};
use crate::vote::{vote, Neighbor, VoteConfig, VoteError};

/// Result of one substrate prediction: the voted label plus the retrieved
/// evidence, similarities non-increasing.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub label: ClassLabel,
    pub neighbour_indices: Vec<u64>,
    pub neighbour_similarities: Vec<f32>,
}

/// Retrieval + vote over an explicit ledger and backend. `k` is capped at
/// the ledger size.
pub fn predict_with(
    ledger: &Ledger,
    index: &dyn VectorIndex,
    query: &EmbeddingVector,
    config: &VoteConfig,
) -> Result<Prediction, VoteError> {
    if ledger.is_empty() {
        return Err(VoteError::NoEvidence);
    }
    let hits = index
        .top_k(query.as_slice(), config.k)
        .map_err(|_| VoteError::NoEvidence)?;
    let neighbors: Vec<Neighbor<&str>> = hits
        .iter()
        .map(|&(id, similarity)| Neighbor {
            label: ledger
                .entry(id)
                .expect("index ids mirror ledger indices")
                .label
                .as_str(),
            similarity,
            index: id,
        })
        .collect();
    let label = vote(&neighbors, config)?.to_string();
    Ok(Prediction {
        label,
        neighbour_indices: hits.iter().map(|h| h.0).collect(),
        neighbour_similarities: hits.iter().map(|h| h.1).collect(),
    })
}

pub struct Substrate {
    name: String,
    ledger: Ledger,
    index: Box<dyn VectorIndex>,
    config: VoteConfig,
    /// When frozen, corrections are ignored (the static retrieval baseline).
    frozen: bool,
    entry_bytes_total: u64,
}

impl Substrate {
    pub fn new(name: impl Into<String>, dim: usize, config: VoteConfig, kind: IndexKind) -> Self {
        Self::with_hnsw_params(name, dim, config, kind, HnswParams::default())
    }

    pub fn with_hnsw_params(
        name: impl Into<String>,
        dim: usize,
        config: VoteConfig,
        kind: IndexKind,
        params: HnswParams,
    ) -> Self {
        Self {
            name: name.into(),
            ledger: Ledger::new(),
            index: build_index(kind, dim, &params),
            config,
            frozen: false,
            entry_bytes_total: 0,
        }
    }

    /// Static variant: seeded once, then corrections are no-ops.
    pub fn frozen(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn ledger(&self) -> &Ledger {
        &self.ledger
    }

    pub fn vote_config(&self) -> &VoteConfig {
        &self.config
    }

    /// Appends one labelled embedding to the ledger and the retrieval index.
    pub fn append(&mut self, embedding: &EmbeddingVector, label: &str) -> u64 {
        let entry = self.ledger.append(embedding.clone(), label.to_string());
        let id = entry.index;
        self.entry_bytes_total += entry_bytes(embedding.dim(), label);
        self.index
            .insert(id, embedding.as_slice())
            .expect("ledger indices are unique and dims fixed");
        id
    }

    pub fn seed_ledger(&mut self, seed_set: &[LabeledExample]) -> Result<(), LedgerError> {
        if !self.ledger.is_empty() {
            return Err(LedgerError::AlreadySeeded {
                len: self.ledger.len(),
            });
        }
        for example in seed_set {
            self.append(&example.embedding, &example.label);
        }
        Ok(())
    }

    pub fn predict_full(&self, query: &EmbeddingVector) -> Result<Prediction, VoteError> {
        predict_with(&self.ledger, self.index.as_ref(), query, &self.config)
    }
}

impl System for Substrate {
    fn name(&self) -> &str {
        &self.name
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        self.seed_ledger(seed_set).expect("system seeded twice");
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        self.predict_full(query).map(|p| p.label)
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        if self.frozen {
            return;
        }
        self.append(embedding, label);
    }

    fn footprint(&self) -> StorageFootprint {
        StorageFootprint {
            entries: self.ledger.len() as u64,
            parameters: 0,
            bytes: self.entry_bytes_total,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Split;
    use crate::ledger::ChainStatus;
    use crate::vote::VoteVariant;

    fn unit(components: Vec<f32>) -> EmbeddingVector {
        EmbeddingVector::new(components).unwrap()
    }

    /// Unit vector at a chosen similarity to e0, using basis direction `axis`
    /// for the orthogonal part.
    fn at_similarity(dim: usize, sim: f32, axis: usize) -> EmbeddingVector {
        let mut v = vec![0.0f32; dim];
        v[0] = sim;
        v[axis] = (1.0 - sim * sim).sqrt();
        unit(v)
    }

    #[test]
    fn single_entry_is_an_exact_match() {
        let mut substrate = Substrate::new("substrate", 4, VoteConfig::default(), IndexKind::Brute);
        let e = unit(vec![0.5, 0.5, 0.5, 0.5]);
        substrate.append(&e, "pay");
        let p = substrate.predict_full(&e).unwrap();
        assert_eq!(p.label, "pay");
        assert!((p.neighbour_similarities[0] - 1.0).abs() < 1e-6);
        assert_eq!(p.neighbour_indices, vec![0]);
    }

    #[test]
    fn empty_ledger_is_no_evidence() {
        let substrate = Substrate::new("substrate", 4, VoteConfig::default(), IndexKind::Brute);
        assert_eq!(
            substrate.predict(&unit(vec![1.0, 0.0, 0.0, 0.0])),
            Err(VoteError::NoEvidence)
        );
    }

    #[test]
    fn near_ties_within_margin_go_to_majority() {
        // Three A entries and two B entries, all within the margin band of
        // the top hit; brute-force top-5 plus a hand vote gives A.
        let dim = 8;
        let mut substrate = Substrate::new("substrate", dim, VoteConfig::default(), IndexKind::Brute);
        substrate.append(&at_similarity(dim, 0.96, 1), "A");
        substrate.append(&at_similarity(dim, 0.95, 2), "A");
        substrate.append(&at_similarity(dim, 0.94, 3), "A");
        substrate.append(&at_similarity(dim, 0.955, 4), "B");
        substrate.append(&at_similarity(dim, 0.945, 5), "B");
        let query = at_similarity(dim, 1.0, 1);
        let p = substrate.predict_full(&query).unwrap();
        assert_eq!(p.label, "A");
        assert_eq!(p.neighbour_indices.len(), 5);
    }

    #[test]
    fn k_is_capped_at_ledger_size() {
        let dim = 4;
        let mut substrate = Substrate::new("substrate", dim, VoteConfig::default(), IndexKind::Brute);
        substrate.append(&unit(vec![1.0, 0.0, 0.0, 0.0]), "a");
        substrate.append(&unit(vec![0.0, 1.0, 0.0, 0.0]), "b");
        let p = substrate.predict_full(&unit(vec![1.0, 0.0, 0.0, 0.0])).unwrap();
        assert_eq!(p.neighbour_indices.len(), 2);
        assert!(p
            .neighbour_similarities
            .windows(2)
            .all(|w| w[0] >= w[1]));
    }

    #[test]
    fn frozen_substrate_ignores_corrections() {
        let dim = 4;
        let mut substrate =
            Substrate::new("static_knn", dim, VoteConfig::default(), IndexKind::Brute).frozen();
        let seed = vec![LabeledExample {
            embedding: unit(vec![1.0, 0.0, 0.0, 0.0]),
            label: "known".into(),
            split: Split::Train,
        }];
        System::seed(&mut substrate, &seed);
        let head = substrate.ledger().head_hash();
        substrate.correct(&unit(vec![0.0, 1.0, 0.0, 0.0]), &"novel".to_string());
        assert_eq!(substrate.ledger().len(), 1);
        assert_eq!(substrate.ledger().head_hash(), head);
    }

    #[test]
    fn appends_extend_chain_and_stay_valid() {
        let dim = 4;
        let mut substrate = Substrate::new("substrate", dim, VoteConfig::default(), IndexKind::Brute);
        for i in 0..20 {
            let angle = i as f32;
            substrate.append(&unit(vec![angle.cos(), angle.sin(), 0.3, 0.1]), "x");
        }
        assert_eq!(substrate.ledger().verify_integrity(), ChainStatus::Valid);
    }

    #[test]
    fn hnsw_backend_agrees_on_easy_queries() {
        let dim = 16;
        let mut brute = Substrate::new("substrate", dim, VoteConfig::default(), IndexKind::Brute);
        let mut hnsw = Substrate::new("substrate_hnsw", dim, VoteConfig::default(), IndexKind::Hnsw);
        for i in 0..200u32 {
            let mut v = vec![0.01f32; dim];
            v[(i % 8) as usize] = 1.0;
            let e = unit(v);
            let label = format!("c{}", i % 8);
            brute.append(&e, &label);
            hnsw.append(&e, &label);
        }
        for probe in 0..8usize {
            let mut v = vec![0.01f32; dim];
            v[probe] = 1.0;
            let q = unit(v);
            assert_eq!(
                brute.predict(&q).unwrap(),
                hnsw.predict(&q).unwrap(),
                "probe {probe}"
            );
        }
    }

    #[test]
    fn footprint_counts_entries_and_bytes() {
        let dim = 4;
        let mut substrate = Substrate::new("substrate", dim, VoteConfig::default(), IndexKind::Brute);
        substrate.append(&unit(vec![1.0, 0.0, 0.0, 0.0]), "ab");
        let fp = substrate.footprint();
        assert_eq!(fp.entries, 1);
        assert_eq!(fp.parameters, 0);
        assert_eq!(fp.bytes, 4 * 4 + 2 + 64);
    }

    #[test]
    fn vote_variant_flows_through_prediction() {
        let dim = 8;
        let config = VoteConfig::with_variant(VoteVariant::K1);
        let mut substrate = Substrate::new("substrate_k1", dim, config, IndexKind::Brute);
        substrate.append(&at_similarity(dim, 0.99, 1), "top");
        substrate.append(&at_similarity(dim, 0.90, 2), "other");
        substrate.append(&at_similarity(dim, 0.89, 3), "other");
        let p = substrate.predict_full(&at_similarity(dim, 1.0, 1)).unwrap();
        assert_eq!(p.label, "top");
        assert_eq!(p.neighbour_indices.len(), 1);
    }
}
