//! Memory-budgeted substrate variants: reservoir sampling (Algorithm R) and
//! FIFO eviction over a fixed number of live entries. The seed corpus flows
//! through the same eviction mechanism as stream corrections; there is no
//! exempt training phase.
//!
//! Hash-chain recording is optional here. When enabled, the chain records
//! every insert plus an eviction tombstone per evicted entry; it is off by
//! default so budgeted runs honestly hold only the live set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::index::TopK;
use crate::ledger::Ledger;
use crate::substrate::Prediction;
use crate::system::{entry_bytes, StorageFootprint, System};
use crate::vote::{vote, Neighbor, VoteConfig, VoteError};

#[derive(Debug, Error, PartialEq)]
pub enum BudgetError {
    #[error("budget must be >= 1")]
    ZeroBudget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionPolicy {
    Reservoir,
    Fifo,
}

impl EvictionPolicy {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "reservoir" => Some(Self::Reservoir),
            "fifo" => Some(Self::Fifo),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Reservoir => "reservoir",
            Self::Fifo => "fifo",
        }
    }
}

#[derive(Debug, Clone)]
pub struct BudgetConfig {
    pub budget: usize,
    pub eviction: EvictionPolicy,
    /// Drives reservoir replacement draws only.
    pub rng_seed: u64,
}

impl BudgetConfig {
    pub fn new(budget: usize, eviction: EvictionPolicy, rng_seed: u64) -> Result<Self, BudgetError> {
        if budget == 0 {
            return Err(BudgetError::ZeroBudget);
        }
        Ok(Self {
            budget,
            eviction,
            rng_seed,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InsertOutcome {
    Stored,
    /// Stored, displacing the live entry with this insertion index.
    StoredEvicting(u64),
    /// Reservoir declined the item; nothing changed.
    Dropped,
}

struct LiveEntry {
    embedding: EmbeddingVector,
    label: ClassLabel,
    /// Global insertion index; doubles as the recency key for voting.
    insert_index: u64,
}

pub struct BoundedSubstrate {
    name: String,
    config: BudgetConfig,
    vote_config: VoteConfig,
    slots: Vec<LiveEntry>,
    total_inserted: u64,
    fifo_next: usize,
    rng: ChaCha12Rng,
    live_bytes: u64,
    chain: Option<Ledger>,
}

impl BoundedSubstrate {
    pub fn new(name: impl Into<String>, config: BudgetConfig, vote_config: VoteConfig) -> Self {
        let rng = ChaCha12Rng::seed_from_u64(config.rng_seed);
        Self {
            name: name.into(),
            config,
            vote_config,
            slots: Vec::new(),
            total_inserted: 0,
            fifo_next: 0,
            rng,
            live_bytes: 0,
            chain: None,
        }
    }

    /// Enables audit-trail recording of inserts and eviction tombstones.
    pub fn with_chain(mut self) -> Self {
        self.chain = Some(Ledger::new());
        self
    }

    pub fn live_len(&self) -> usize {
        self.slots.len()
    }

    pub fn live_labels(&self) -> impl Iterator<Item = &str> {
        self.slots.iter().map(|s| s.label.as_str())
    }

    /// Insertion indices of the current live set, ascending.
    pub fn live_insert_indices(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.slots.iter().map(|s| s.insert_index).collect();
        ids.sort_unstable();
        ids
    }

    pub fn chain(&self) -> Option<&Ledger> {
        self.chain.as_ref()
    }

    pub fn total_inserted(&self) -> u64 {
        self.total_inserted
    }

    pub fn bounded_insert(&mut self, embedding: &EmbeddingVector, label: &str) -> InsertOutcome {
        let insert_index = self.total_inserted;
        self.total_inserted += 1;
        if let Some(chain) = self.chain.as_mut() {
            chain.append(embedding.clone(), label.to_string());
        }
        let entry = LiveEntry {
            embedding: embedding.clone(),
            label: label.to_string(),
            insert_index,
        };
        let outcome = if self.slots.len() < self.config.budget {
            self.live_bytes += entry_bytes(entry.embedding.dim(), &entry.label);
            self.slots.push(entry);
            InsertOutcome::Stored
        } else {
            let victim_slot = match self.config.eviction {
                EvictionPolicy::Fifo => {
                    let slot = self.fifo_next;
                    self.fifo_next = (self.fifo_next + 1) % self.config.budget;
                    slot
                }
                EvictionPolicy::Reservoir => {
                    // Algorithm R: item t (1-based) survives with probability
                    // budget / t, replacing a uniformly random slot.
                    let t = self.total_inserted;
                    let draw = self.rng.gen_range(0..t);
                    if draw >= self.config.budget as u64 {
                        return InsertOutcome::Dropped;
                    }
                    draw as usize
                }
            };
            let evicted = std::mem::replace(&mut self.slots[victim_slot], entry);
            self.live_bytes -= entry_bytes(evicted.embedding.dim(), &evicted.label);
            let stored = &self.slots[victim_slot];
            self.live_bytes += entry_bytes(stored.embedding.dim(), &stored.label);
            if let Some(chain) = self.chain.as_mut() {
                chain.append(
                    evicted.embedding.clone(),
                    format!("__evicted__:{}", evicted.insert_index),
                );
            }
            InsertOutcome::StoredEvicting(evicted.insert_index)
        };
        outcome
    }

    /// Same vote semantics as the unbounded substrate, restricted to the
    /// live set. Exact scan; ties break toward the smaller insertion index.
    pub fn bounded_predict(&self, query: &EmbeddingVector) -> Result<Prediction, VoteError> {
        if self.slots.is_empty() {
            return Err(VoteError::NoEvidence);
        }
        let k = self.vote_config.k.min(self.slots.len());
        let mut top = TopK::new(k);
        for slot in &self.slots {
            let sim = query.cosine(&slot.embedding).clamp(-1.0, 1.0);
            top.push(slot.insert_index, sim);
        }
        let hits = top.into_sorted();
        let neighbors: Vec<Neighbor<&str>> = hits
            .iter()
            .map(|&(insert_index, similarity)| Neighbor {
                label: self
                    .slots
                    .iter()
                    .find(|s| s.insert_index == insert_index)
                    .expect("live id")
                    .label
                    .as_str(),
                similarity,
                index: insert_index,
            })
            .collect();
        let label = vote(&neighbors, &self.vote_config)?.to_string();
        Ok(Prediction {
            label,
            neighbour_indices: hits.iter().map(|h| h.0).collect(),
            neighbour_similarities: hits.iter().map(|h| h.1).collect(),
        })
    }
}

impl System for BoundedSubstrate {
    fn name(&self) -> &str {
        &self.name
    }

    fn seed(&mut self, seed_set: &[LabeledExample]) {
        assert_eq!(self.total_inserted, 0, "system seeded twice");
        for example in seed_set {
            self.bounded_insert(&example.embedding, &example.label);
        }
    }

    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
        self.bounded_predict(query).map(|p| p.label)
    }

    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
        self.bounded_insert(embedding, label);
    }

    fn footprint(&self) -> StorageFootprint {
        let chain_bytes: u64 = self
            .chain
            .as_ref()
            .map(|c| {
                c.entries()
                    .iter()
                    .map(|e| entry_bytes(e.embedding.dim(), &e.label))
                    .sum()
            })
            .unwrap_or(0);
        StorageFootprint {
            entries: self.slots.len() as u64,
            parameters: 0,
            bytes: self.live_bytes + chain_bytes,
        }
    }
}
