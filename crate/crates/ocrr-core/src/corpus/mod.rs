//! Embedding corpora: the binary file format with its CSV converter,
//! held-out-class splits, and synthetic class-incremental generation.

mod format;
mod split;
mod synthetic;

pub use format::{
    convert_csv_to_embeddings, load_embedding_file, write_embedding_file, EMBEDDING_MAGIC,
};
pub use split::{split_held_out, HeldOutSplit};
pub use synthetic::{
    class_centroid, class_label, generate_synthetic, generate_synthetic_split, sample_around,
    sample_rng,
};

use thiserror::Error;

use crate::embedding::{ClassLabel, EmbeddingVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn flag(self) -> u8 {
        match self {
            Split::Train => 0,
            Split::Test => 1,
        }
    }

    pub fn from_flag(flag: u8) -> Option<Self> {
        match flag {
            0 => Some(Split::Train),
            1 => Some(Split::Test),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LabeledExample {
    pub embedding: EmbeddingVector,
    pub label: ClassLabel,
    pub split: Split,
}

/// Parameters for the synthetic class-incremental generator: random unit
/// centroids with isotropic Gaussian noise, renormalized.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub num_classes: usize,
    pub centroid_seed: u64,
    /// Per-component Gaussian std before renormalization.
    pub noise_sigma: f32,
    pub samples_per_class: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            dim: 384,
            num_classes: 100,
            centroid_seed: 7,
            noise_sigma: 0.05,
            samples_per_class: 100,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.num_classes < 2 {
            return Err(CorpusError::InvalidSpec(
                "num_classes must be >= 2".into(),
            ));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(CorpusError::InvalidSpec(
                "noise_sigma must be >= 0".into(),
            ));
        }
        if self.dim == 0 {
            return Err(CorpusError::InvalidSpec("dim must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("record {record}: dimension mismatch (header says {expected}, record has {actual})")]
    DimensionMismatch {
        record: usize,
        expected: usize,
        actual: usize,
    },
    #[error("record {record}: component {component} is not finite")]
    NonFiniteComponent { record: usize, component: usize },
    #[error("record {record}: zero-norm embedding cannot be normalized")]
    ZeroNormRecord { record: usize },
    #[error("record {record}: bad label ({reason})")]
    BadLabel { record: usize, reason: String },
    #[error("record {record}: bad split flag {value} (expected 0 or 1)")]
    BadSplitFlag { record: usize, value: u8 },
    #[error("record {record}: truncated while reading {what}")]
    Truncated { record: usize, what: &'static str },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
