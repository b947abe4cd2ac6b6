//! Benchmark harness and reference systems for online correction recovery:
//! a hash-chained append-only retrieval substrate with margin-band majority
//! voting, bounded-memory variants, gradient-based comparison learners, a
//! streaming correction protocol, and a brute-force vs HNSW scale study.
//!
//! The crate is organized around the protocol's moving parts:
//!
//! - [`corpus`]: embedding datasets (binary file format, CSV conversion,
//!   held-out-class splits, synthetic class-incremental generation)
//! - [`ledger`]: the append-only SHA-256 hash chain
//! - [`vote`]: margin-band majority voting and its ablation variants
//! - [`index`]: exact and approximate (HNSW) top-k retrieval, plus the
//!   recall/agreement scale study
//! - [`substrate`] / [`bounded`]: the retrieval substrate, unbounded and
//!   memory-budgeted
//! - [`baselines`]: linear-head learners (static, online, EWC, A-GEM, LwF,
//!   one-vs-rest logistic regression) and the retrieval/parametric hybrid
//! - [`harness`]: the correction-stream protocol, checkpointing, sweeps,
//!   and CSV outputs

pub mod bounded;
pub mod corpus;
pub mod embedding;
pub mod index;
pub mod ledger;
pub mod substrate;
pub mod system;
pub mod baselines;
pub mod harness;
mod util;
pub mod vote;

pub use bounded::{BoundedSubstrate, BudgetConfig, EvictionPolicy, InsertOutcome};
pub use corpus::{LabeledExample, Split, SyntheticSpec};
pub use corpus::{generate_synthetic, load_embedding_file, split_held_out, HeldOutSplit};
pub use embedding::{ClassLabel, EmbeddingVector};
pub use index::{BruteIndex, HnswIndex, HnswParams, IndexKind, VectorIndex};
pub use ledger::{ChainStatus, Ledger, LedgerEntry};
pub use substrate::{Prediction, Substrate};
pub use system::{StorageFootprint, System};
pub use util::derive_seed;
pub use vote::{vote, Neighbor, VoteConfig, VoteVariant};
