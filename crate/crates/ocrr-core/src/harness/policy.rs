//! Correction policies: decide, per wrong prediction, whether the true label
//! is revealed to the system. One uniform draw is consumed per wrong
//! prediction only, so sparse-policy runs are prefix-stable.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use super::config::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyKind {
    /// Every wrong prediction is corrected.
    Oracle,
    /// Wrong predictions are corrected with probability p.
    RandomP(f64),
}

/// Parses `oracle`, `random-50`, `random-10`, or any `random-<percent>`.
pub fn parse_policy(s: &str) -> Result<PolicyKind, ConfigError> {
    if s == "oracle" {
        return Ok(PolicyKind::Oracle);
    }
    if let Some(pct) = s.strip_prefix("random-") {
        let pct: f64 = pct
            .parse()
            .map_err(|_| ConfigError::Validation(format!("bad policy {s:?}")))?;
        let p = pct / 100.0;
        if p > 0.0 && p <= 1.0 {
            return Ok(PolicyKind::RandomP(p));
        }
        return Err(ConfigError::Validation(format!(
            "policy {s:?}: p must be in (0, 1]"
        )));
    }
    Err(ConfigError::Validation(format!("unknown policy {s:?}")))
}

#[derive(Debug)]
pub struct CorrectionPolicy {
    name: String,
    kind: PolicyKind,
    rng: ChaCha12Rng,
}

impl CorrectionPolicy {
    pub fn new(name: impl Into<String>, kind: PolicyKind, rng_seed: u64) -> Self {
        if let PolicyKind::RandomP(p) = kind {
            assert!(p > 0.0 && p <= 1.0, "p must be in (0, 1]");
        }
        Self {
            name: name.into(),
            kind,
            rng: ChaCha12Rng::seed_from_u64(rng_seed),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Whether this wrong prediction triggers a correction. Correct
    /// predictions consume no randomness.
    pub fn fires(&mut self, was_wrong: bool) -> bool {
        if !was_wrong {
            return false;
        }
        match self.kind {
            PolicyKind::Oracle => true,
            PolicyKind::RandomP(p) => self.rng.gen::<f64>() < p,
        }
    }
}
