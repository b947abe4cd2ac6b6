//! Hierarchical navigable small-world graph for approximate top-k.
//!
//! Standard construction: exponentially distributed layer assignment, greedy
//! descent through the upper layers, beam search with `ef_construction` at
//! each connected layer, and heuristic neighbour selection (a candidate is
//! kept when it is closer to the query than to any already-kept neighbour,
//! with discarded candidates backfilling unused slots).
//!
//! Layer assignment is a pure function of the external id and a fixed seed,
//! so a rebuild over the same insertion sequence yields the same graph.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use ordered_float::OrderedFloat;

use crate::embedding::dot;

use super::{clamp_similarity, IdGuard, IndexError, VectorIndex};

const MAX_LEVEL: usize = 30;

#[derive(Debug, Clone)]
pub struct HnswParams {
    /// Graph degree target; layer 0 allows `2 * m` links.
    pub m: usize,
    /// Beam width during construction.
    pub ef_construction: usize,
    /// Beam width during search.
    pub ef_search: usize,
    /// Seed mixed into per-id layer assignment.
    pub level_seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            level_seed: 0x6f63_7272,
        }
    }
}

#[derive(Debug, Default)]
struct VisitedBitset(Vec<u64>);

impl VisitedBitset {
    fn with_capacity(n: usize) -> Self {
        Self(vec![0u64; n.div_ceil(64)])
    }

    fn reset(&mut self, n: usize) {
        let words = n.div_ceil(64);
        if self.0.len() < words {
            self.0.resize(words, 0);
        }
        self.0.fill(0);
    }

    /// Marks `slot`; returns true when it was not yet visited.
    #[inline]
    fn visit(&mut self, slot: u32) -> bool {
        let word = (slot / 64) as usize;
        let bit = 1u64 << (slot % 64);
        let fresh = self.0[word] & bit == 0;
        self.0[word] |= bit;
        fresh
    }
}

pub struct HnswIndex {
    dim: usize,
    params: HnswParams,
    inv_log_m: f64,
    ids: Vec<u64>,
    data: Vec<f32>,
    /// Per slot, per level: neighbour slots.
    links: Vec<Vec<Vec<u32>>>,
    entry: Option<u32>,
    max_level: usize,
    guard: IdGuard,
    scratch: VisitedBitset,
}

impl HnswIndex {
    pub fn new(dim: usize, params: HnswParams) -> Self {
        let inv_log_m = 1.0 / (params.m.max(2) as f64).ln();
        Self {
            dim,
            params,
            inv_log_m,
            ids: Vec::new(),
            data: Vec::new(),
            links: Vec::new(),
            entry: None,
            max_level: 0,
            guard: IdGuard::default(),
            scratch: VisitedBitset::default(),
        }
    }

    pub fn params(&self) -> &HnswParams {
        &self.params
    }

    #[inline]
    fn vector(&self, slot: u32) -> &[f32] {
        let s = slot as usize * self.dim;
        &self.data[s..s + self.dim]
    }

    #[inline]
    fn similarity(&self, query: &[f32], slot: u32) -> f32 {
        dot(query, self.vector(slot))
    }

    fn assign_level(&self, id: u64) -> usize {
        let h = splitmix64(self.params.level_seed ^ splitmix64(id));
        // Uniform in (0, 1), then the usual exponential layer draw.
        let u = ((h >> 11) as f64 + 0.5) / (1u64 << 53) as f64;
        ((-u.ln() * self.inv_log_m) as usize).min(MAX_LEVEL)
    }

    /// Greedy walk at one level: move to the best-improving neighbour until
    /// no neighbour beats the current node.
    fn greedy_descend(&self, query: &[f32], start: u32, level: usize) -> u32 {
        let mut current = start;
        let mut best = self.similarity(query, current);
        loop {
            let mut improved = false;
            for &nb in &self.links[current as usize][level] {
                let sim = self.similarity(query, nb);
                if sim > best {
                    best = sim;
                    current = nb;
                    improved = true;
                }
            }
            if !improved {
                return current;
            }
        }
    }

    /// Beam search at one level, seeded from `entry_points`. Returns up to
    /// `ef` results sorted by similarity descending.
    fn search_layer(
        &self,
        query: &[f32],
        entry_points: &[u32],
        ef: usize,
        level: usize,
        visited: &mut VisitedBitset,
    ) -> Vec<(f32, u32)> {
        visited.reset(self.ids.len());
        // Max-heap of candidates to expand; min-heap of current best results.
        let mut candidates: BinaryHeap<(OrderedFloat<f32>, u32)> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<(OrderedFloat<f32>, u32)>> = BinaryHeap::new();
        for &ep in entry_points {
            if visited.visit(ep) {
                let sim = self.similarity(query, ep);
                candidates.push((OrderedFloat(sim), ep));
                results.push(Reverse((OrderedFloat(sim), ep)));
            }
        }
        while let Some((OrderedFloat(sim), slot)) = candidates.pop() {
            let worst = results.peek().map(|Reverse((s, _))| s.0).unwrap_or(f32::NEG_INFINITY);
            if results.len() >= ef && sim < worst {
                break;
            }
            for &nb in &self.links[slot as usize][level] {
                if !visited.visit(nb) {
                    continue;
                }
                let nb_sim = self.similarity(query, nb);
                let worst = results.peek().map(|Reverse((s, _))| s.0).unwrap_or(f32::NEG_INFINITY);
                if results.len() < ef || nb_sim > worst {
                    candidates.push((OrderedFloat(nb_sim), nb));
                    results.push(Reverse((OrderedFloat(nb_sim), nb)));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<(f32, u32)> = results
            .into_iter()
            .map(|Reverse((s, slot))| (s.0, slot))
            .collect();
        out.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        out
    }

    /// Heuristic selection: walk candidates closest-first, keep one when it
    /// is closer to the query point than to anything already kept, then
    /// backfill from the discarded pool.
    fn select_neighbors(&self, candidates: &[(f32, u32)], m: usize) -> Vec<u32> {
        let mut selected: Vec<u32> = Vec::with_capacity(m);
        let mut discarded: Vec<u32> = Vec::new();
        for &(sim_to_query, cand) in candidates {
            if selected.len() >= m {
                break;
            }
            let cand_vec = self.vector(cand);
            let dominated = selected
                .iter()
                .any(|&s| dot(cand_vec, self.vector(s)) > sim_to_query);
            if dominated {
                discarded.push(cand);
            } else {
                selected.push(cand);
            }
        }
        for cand in discarded {
            if selected.len() >= m {
                break;
            }
            selected.push(cand);
        }
        selected
    }

    /// Re-select a node's links at `level` after an overflow.
    fn shrink_links(&mut self, slot: u32, level: usize, m_max: usize) {
        let node_vec: Vec<f32> = self.vector(slot).to_vec();
        let mut scored: Vec<(f32, u32)> = self.links[slot as usize][level]
            .iter()
            .map(|&nb| (dot(&node_vec, self.vector(nb)), nb))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));
        let kept = self.select_neighbors(&scored, m_max);
        self.links[slot as usize][level] = kept;
    }
}

impl VectorIndex for HnswIndex {
    fn insert(&mut self, id: u64, vector: &[f32]) -> Result<(), IndexError> {
        if vector.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                actual: vector.len(),
            });
        }
        self.guard.check_and_insert(id, &self.ids)?;
        let slot = self.ids.len() as u32;
        let level = self.assign_level(id);
        self.ids.push(id);
        self.data.extend_from_slice(vector);
        let mut node_links = Vec::with_capacity(level + 1);
        for l in 0..=level {
            let cap = if l == 0 { self.params.m * 2 } else { self.params.m };
            node_links.push(Vec::with_capacity(cap));
        }
        self.links.push(node_links);

        let Some(entry) = self.entry else {
            self.entry = Some(slot);
            self.max_level = level;
            return Ok(());
        };

        let query: Vec<f32> = vector.to_vec();
        let mut visited = std::mem::take(&mut self.scratch);

        let mut ep = entry;
        if self.max_level > level {
            for l in (level + 1..=self.max_level).rev() {
                ep = self.greedy_descend(&query, ep, l);
            }
        }
        let mut entry_points = vec![ep];
        for l in (0..=level.min(self.max_level)).rev() {
            let found =
                self.search_layer(&query, &entry_points, self.params.ef_construction, l, &mut visited);
            let m_max = if l == 0 { self.params.m * 2 } else { self.params.m };
            let chosen = self.select_neighbors(&found, self.params.m);
            self.links[slot as usize][l] = chosen.clone();
            for nb in chosen {
                self.links[nb as usize][l].push(slot);
                if self.links[nb as usize][l].len() > m_max {
                    self.shrink_links(nb, l, m_max);
                }
            }
            entry_points = found.into_iter().map(|(_, s)| s).collect();
        }

        self.scratch = visited;
        if level > self.max_level {
            self.entry = Some(slot);
            self.max_level = level;
        }
        Ok(())
    }

    fn top_k(&self, query: &[f32], k: usize) -> Result<Vec<(u64, f32)>, IndexError> {
        let Some(entry) = self.entry else {
            return Err(IndexError::Empty);
        };
        if query.len() != self.dim {
            return Err(IndexError::DimMismatch {
                expected: self.dim,
                actual: query.len(),
            });
        }
        let mut ep = entry;
        for l in (1..=self.max_level).rev() {
            ep = self.greedy_descend(query, ep, l);
        }
        let ef = self.params.ef_search.max(k);
        let mut visited = VisitedBitset::with_capacity(self.ids.len());
        let found = self.search_layer(query, &[ep], ef, 0, &mut visited);
        let mut out: Vec<(u64, f32)> = found
            .into_iter()
            .take(k)
            .map(|(sim, slot)| (self.ids[slot as usize], clamp_similarity(sim)))
            .collect();
        // slot order and id order can differ; present ties by smaller id
        out.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        Ok(out)
    }

    fn len(&self) -> usize {
        self.ids.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}
