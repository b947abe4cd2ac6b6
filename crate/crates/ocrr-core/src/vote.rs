//! Margin-band majority voting over retrieved neighbours.
//!
//! The full rule keeps only neighbours whose similarity is within `margin`
//! of the top hit, takes the majority label among the survivors, and breaks
//! ties first by the best survivor's similarity and then by ledger recency.
//! The ablation variants peel those stages off one at a time.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VoteError {
    #[error("no evidence: neighbour list is empty")]
    NoEvidence,
    #[error("invalid vote config: {0}")]
    InvalidConfig(String),
}

/// One retrieved neighbour: its label, cosine similarity to the query, and
/// its ledger index (used by the recency tiebreak).
#[derive(Debug, Clone)]
pub struct Neighbor<L> {
    pub label: L,
    pub similarity: f32,
    pub index: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VoteVariant {
    /// Margin band, majority count, max-similarity tiebreak, recency tiebreak.
    Full,
    /// Margin band and majority count only; remaining ties go to the label
    /// encountered first in similarity order.
    CountOnly,
    /// Margin band, majority count, max-similarity tiebreak; no recency stage.
    NoRecency,
    /// Single nearest neighbour (forces k = 1).
    K1,
    /// No margin band: the label with the largest similarity sum over all k
    /// neighbours wins.
    SumSim,
}

impl VoteVariant {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "full" => Some(Self::Full),
            "count_only" => Some(Self::CountOnly),
            "no_recency" => Some(Self::NoRecency),
            "k1" => Some(Self::K1),
            "sumsim" => Some(Self::SumSim),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::CountOnly => "count_only",
            Self::NoRecency => "no_recency",
            Self::K1 => "k1",
            Self::SumSim => "sumsim",
        }
    }
}

impl fmt::Display for VoteVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct VoteConfig {
    pub k: usize,
    pub margin: f32,
    pub variant: VoteVariant,
}

impl Default for VoteConfig {
    fn default() -> Self {
        Self {
            k: 5,
            margin: 0.05,
            variant: VoteVariant::Full,
        }
    }
}

impl VoteConfig {
    /// Validates the invariants (`k >= 1`, `margin >= 0`) and forces `k = 1`
    /// for the single-neighbour variant.
    pub fn new(k: usize, margin: f32, variant: VoteVariant) -> Result<Self, VoteError> {
        if k < 1 {
            return Err(VoteError::InvalidConfig("k must be >= 1".into()));
        }
        if !(margin >= 0.0) {
            return Err(VoteError::InvalidConfig("margin must be >= 0".into()));
        }
        let k = if variant == VoteVariant::K1 { 1 } else { k };
        Ok(Self { k, margin, variant })
    }

    pub fn with_variant(variant: VoteVariant) -> Self {
        Self::new(5, 0.05, variant).expect("defaults are valid")
    }
}

struct Tally<'a, L> {
    label: &'a L,
    count: usize,
    sum_sim: f32,
    best_sim: f32,
    best_index: u64,
}

fn tally<'a, L: PartialEq>(neighbors: impl Iterator<Item = &'a Neighbor<L>>) -> Vec<Tally<'a, L>>
where
    L: 'a,
{
    // First-encounter order is preserved; with neighbours sorted by
    // similarity this makes "first encountered" a deterministic fallback.
    let mut tallies: Vec<Tally<'a, L>> = Vec::new();
    for n in neighbors {
        match tallies.iter_mut().find(|t| *t.label == n.label) {
            Some(t) => {
                t.count += 1;
                t.sum_sim += n.similarity;
                if n.similarity > t.best_sim {
                    t.best_sim = n.similarity;
                    t.best_index = n.index;
                } else if n.similarity == t.best_sim && n.index > t.best_index {
                    t.best_index = n.index;
                }
            }
            None => tallies.push(Tally {
                label: &n.label,
                count: 1,
                sum_sim: n.similarity,
                best_sim: n.similarity,
                best_index: n.index,
            }),
        }
    }
    tallies
}

/// Applies the configured vote rule to a neighbour list sorted by similarity,
/// non-increasing. Returns the winning label.
pub fn vote<L: PartialEq + Clone>(
    neighbors: &[Neighbor<L>],
    config: &VoteConfig,
) -> Result<L, VoteError> {
    if neighbors.is_empty() {
        return Err(VoteError::NoEvidence);
    }
    debug_assert!(
        neighbors.windows(2).all(|w| w[0].similarity >= w[1].similarity),
        "neighbours must be sorted by similarity, non-increasing"
    );
    let winner = match config.variant {
        VoteVariant::K1 => neighbors[0].label.clone(),
        VoteVariant::SumSim => {
            let tallies = tally(neighbors.iter());
            let mut best = &tallies[0];
            for t in &tallies[1..] {
                if t.sum_sim > best.sum_sim {
                    best = t;
                }
            }
            best.label.clone()
        }
        VoteVariant::Full | VoteVariant::CountOnly | VoteVariant::NoRecency => {
            let band_floor = neighbors[0].similarity - config.margin;
            let tallies = tally(neighbors.iter().filter(|n| n.similarity >= band_floor));
            let mut best = &tallies[0];
            for t in &tallies[1..] {
                let better = match config.variant {
                    VoteVariant::CountOnly => t.count > best.count,
                    VoteVariant::NoRecency => {
                        t.count > best.count
                            || (t.count == best.count && t.best_sim > best.best_sim)
                    }
                    _ => {
                        t.count > best.count
                            || (t.count == best.count && t.best_sim > best.best_sim)
                            || (t.count == best.count
                                && t.best_sim == best.best_sim
                                && t.best_index > best.best_index)
                    }
                };
                if better {
                    best = t;
                }
            }
            best.label.clone()
        }
    };
    Ok(winner)
}
