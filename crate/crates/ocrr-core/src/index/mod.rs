//! Vector retrieval backends: an exact brute-force scan and an HNSW graph,
//! behind one trait so the substrate can swap them. Similarities are cosine
//! (dot products over unit vectors), clamped to [-1, 1].

mod brute;
mod hnsw;
pub mod scale;

pub use brute::BruteIndex;
pub(crate) use brute::TopK;
pub use hnsw::{HnswIndex, HnswParams};
pub use scale::{
    recall_at_k, run_scale_study, write_scale_csv, write_scale_metadata, ScaleOutcome,
    ScaleStudyConfig, ScaleStudyRow,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum IndexError {
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("dimension mismatch: index holds {expected}-d vectors, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("index is empty")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Brute,
    Hnsw,
}

impl IndexKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "brute" => Some(Self::Brute),
            "hnsw" => Some(Self::Hnsw),
            _ => None,
        }
    }
}

/// Common contract for retrieval backends. `top_k` returns `(id, similarity)`
/// pairs sorted by similarity descending; ties and determinism guarantees are
/// backend-specific (the brute scan is exact and breaks ties by smaller id).
pub trait VectorIndex: Send + Sync {
    fn insert(&mut self, id: u64, vector: &[f32]) -> Result<(), IndexError>;
    fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<(u64, f32)>, IndexError>;
    fn len(&self) -> usize;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
    fn dim(&self) -> usize;
}

pub fn build_index(kind: IndexKind, dim: usize, params: &HnswParams) -> Box<dyn VectorIndex> {
    match kind {
        IndexKind::Brute => Box::new(BruteIndex::new(dim)),
        IndexKind::Hnsw => Box::new(HnswIndex::new(dim, params.clone())),
    }
}

/// Duplicate-id guard with a free path for the common case of strictly
/// increasing ids; a hash set is built from the caller's id list only once
/// an out-of-order id appears.
#[derive(Debug, Default)]
pub(crate) struct IdGuard {
    max_id: Option<u64>,
    set: Option<std::collections::HashSet<u64>>,
}

impl IdGuard {
    pub fn check_and_insert(&mut self, id: u64, existing: &[u64]) -> Result<(), IndexError> {
        if let Some(set) = self.set.as_mut() {
            if !set.insert(id) {
                return Err(IndexError::DuplicateId(id));
            }
            return Ok(());
        }
        match self.max_id {
            Some(max) if id <= max => {
                let mut set: std::collections::HashSet<u64> = existing.iter().copied().collect();
                if !set.insert(id) {
                    return Err(IndexError::DuplicateId(id));
                }
                self.set = Some(set);
                Ok(())
            }
            _ => {
                self.max_id = Some(id);
                Ok(())
            }
        }
    }
}

#[inline]
pub(crate) fn clamp_similarity(s: f32) -> f32 {
    s.clamp(-1.0, 1.0)
}
