//! Unit-norm embedding vectors and the dot-product kernel every subsystem
//! shares. Vectors are L2-normalized once at ingestion so cosine similarity
//! reduces to a plain dot product everywhere downstream.

use thiserror::Error;

/// Opaque class tag carried by examples and ledger entries.
pub type ClassLabel = String;

/// Tolerance on the unit-norm invariant. Vectors already within this band
/// are kept bit-for-bit (round trips stay exact); anything else is rescaled.
pub const UNIT_NORM_TOLERANCE: f32 = 1e-5;

#[derive(Debug, Error, PartialEq)]
pub enum EmbeddingError {
    #[error("component {index} is not finite")]
    NonFinite { index: usize },
    #[error("vector has zero norm and cannot be normalized")]
    ZeroNorm,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },
}

/// Fixed-dimension embedding with unit L2 norm.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Validates finiteness and normalizes to unit length. Inputs that are
    /// already unit-norm within [`UNIT_NORM_TOLERANCE`] pass through
    /// unchanged, which keeps save/load round trips bit-exact.
    pub fn new(components: Vec<f32>) -> Result<Self, EmbeddingError> {
        for (index, c) in components.iter().enumerate() {
            if !c.is_finite() {
                return Err(EmbeddingError::NonFinite { index });
            }
        }
        let norm = l2_norm(&components);
        if norm == 0.0 {
            return Err(EmbeddingError::ZeroNorm);
        }
        if (norm - 1.0).abs() <= UNIT_NORM_TOLERANCE {
            return Ok(Self(components));
        }
        let inv = 1.0 / norm;
        let mut v = components;
        for c in &mut v {
            *c *= inv;
        }
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    /// Cosine similarity; both vectors are unit-norm so this is the dot product.
    pub fn cosine(&self, other: &Self) -> f32 {
        dot(&self.0, &other.0)
    }
}

impl AsRef<[f32]> for EmbeddingVector {
    fn as_ref(&self) -> &[f32] {
        &self.0
    }
}

/// Dot product over eight partial accumulators. The layout lets the compiler
/// emit wide FMA; this is the hot kernel of every retrieval scan.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f32; 8];
    let mut chunks_a = a.chunks_exact(8);
    let mut chunks_b = b.chunks_exact(8);
    for (ca, cb) in (&mut chunks_a).zip(&mut chunks_b) {
        for lane in 0..8 {
            acc[lane] += ca[lane] * cb[lane];
        }
    }
    let mut tail = 0.0f32;
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[4]) + (acc[1] + acc[5]) + (acc[2] + acc[6]) + (acc[3] + acc[7]) + tail
}

pub fn l2_norm(v: &[f32]) -> f32 {
    dot(v, v).sqrt()
}
