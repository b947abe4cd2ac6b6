//! Exact top-k by full scan. This is the recall ceiling the approximate
//! backend is measured against; ties break toward the smaller id so exact
//! top-k is fully deterministic.

use crate::embedding::dot;

use super::{clamp_similarity, IdGuard, IndexError, VectorIndex};

#[derive(Debug, Default)]
pub struct BruteIndex {
    dim: usize,
    ids: Vec<u64>,
    data: Vec<f32>,
    guard: IdGuard,
}

impl BruteIndex {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ids: Vec::new(),
            data: Vec::new(),
            guard: IdGuard::default(),
        }
    }

    #[inline]
    fn vector(&self, slot: usize) -> &[f32] {
        &self.data[slot * self.dim..(slot + 1) * self.dim]
    }
}

/// Keeps the k best `(similarity, id)` pairs under the order
/// (similarity desc, id asc). Linear insertion; k is small.
pub(crate) struct TopK {
    k: usize,
    items: Vec<(u64, f32)>,
}

impl TopK {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            items: Vec::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn worst(&self) -> Option<f32> {
        if self.items.len() < self.k {
            None
        } else {
            self.items.last().map(|(_, s)| *s)
        }
    }

    #[inline]
    pub fn push(&mut self, id: u64, sim: f32) {
        if self.items.len() == self.k {
            let &(worst_id, worst_sim) = self.items.last().expect("k >= 1");
            if sim < worst_sim || (sim == worst_sim && id > worst_id) {
                return;
            }
        }
        let pos = self
            .items
            .partition_point(|&(other_id, other_sim)| {
                other_sim > sim || (other_sim == sim && other_id < id)
            });
        self.items.insert(pos, (id, sim));
        if self.items.len() > self.k {
            self.items.pop();
        }
    }

    pub fn into_sorted(self) -> Vec<(u64, f32)> {
        self.items
    }
}

impl VectorIndex for BruteIndex {
    fn insert(&mut self, id: u64, vector: &[f32]) -> Result<(), IndexError> {
        if vector.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.guard.check_and_insert(id, &self.ids)?;
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        Ok(())
    }

    fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<(u64, f32)>, IndexError> {
        if self.ids.is_empty() {
            return Err(IndexError::Empty);
        }
        if query.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let k = k.min(self.ids.len()).max(1);
        let mut top = TopK::new(k);
        for (slot, &id) in self.ids.iter().enumerate() {
            let sim = clamp_similarity(dot(query, self.vector(slot)));
            if let Some(worst) = top.worst() {
                if sim < worst {
                    continue;
                }
            }
            top.push(id, sim);
        }
        Ok(top.into_sorted())
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}
