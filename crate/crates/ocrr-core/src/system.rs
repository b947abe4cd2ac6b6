//! The contract every benchmarked system implements: predict, accept one
//! correction, and report its storage footprint. Prediction takes `&self`,
//! which is what makes checkpoint evaluation side-effect-free by
//! construction.

use crate::corpus::LabeledExample;
use crate::embedding::{ClassLabel, EmbeddingVector};
use crate::vote::VoteError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StorageFootprint {
    /// Stored examples (ledger entries, live buffer slots, memory items).
    pub entries: u64,
    /// Learned parameter count across all tensors the system holds.
    pub parameters: u64,
    /// Total bytes: entries at `4*dim + label bytes + 64` overhead each,
    /// parameters at 4 bytes each.
    pub bytes: u64,
}

impl StorageFootprint {
    pub fn combine(self, other: StorageFootprint) -> StorageFootprint {
        StorageFootprint {
            entries: self.entries + other.entries,
            parameters: self.parameters + other.parameters,
            bytes: self.bytes + other.bytes,
        }
    }
}

/// Per-entry byte accounting used by every ledger-backed system.
pub fn entry_bytes(dim: usize, label: &str) -> u64 {
    4 * dim as u64 + label.len() as u64 + 64
}

pub trait System: Send + Sync {
    fn name(&self) -> &str;

    /// Fits the initial state on the known classes' training set, by this
    /// system's own seeding rule. Called exactly once, before the stream.
    fn seed(&mut self, seed_set: &[LabeledExample]);

    /// Classifies one query. `Err(VoteError::NoEvidence)` means the system
    /// has nothing to answer with; the harness scores it as wrong.
    fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError>;

    /// Applies exactly one update step for a supervised correction.
    fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel);

    fn footprint(&self) -> StorageFootprint;

    /// Anything unusual worth recording with the run (fallbacks taken,
    /// degraded modes). `None` when the run was ordinary.
    fn run_metadata(&self) -> Option<String> {
        None
    }
}
