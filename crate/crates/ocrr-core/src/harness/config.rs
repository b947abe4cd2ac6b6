//! Declarative sweep configuration (TOML): datasets as embedding files or
//! synthetic specs, systems with hyperparameter overrides, policies, seeds,
//! and the protocol constants B and H.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::corpus::SyntheticSpec;

use super::policy::parse_policy;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config validation error: {0}")]
    Validation(String),
    #[error("unknown system {0:?}")]
    UnknownSystem(String),
    #[error("system {system:?}: unknown or mistyped parameter {param:?}")]
    UnknownParam { system: String, param: String },
}

fn default_b() -> usize {
    50
}

fn default_h() -> usize {
    10
}

fn default_dim() -> usize {
    384
}

fn default_test_per_class() -> usize {
    20
}

fn default_noise_sigma() -> f32 {
    0.05
}

fn default_centroid_seed() -> u64 {
    7
}

fn default_sample_seed() -> u64 {
    13
}

fn default_budgets() -> Vec<usize> {
    vec![100, 500, 1000, 5000]
}

fn default_evictions() -> Vec<String> {
    vec!["reservoir".into(), "fifo".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDatasetSpec {
    #[serde(default = "default_dim")]
    pub dim: usize,
    pub num_classes: usize,
    pub samples_per_class: usize,
    #[serde(default = "default_test_per_class")]
    pub test_per_class: usize,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f32,
    #[serde(default = "default_centroid_seed")]
    pub centroid_seed: u64,
    #[serde(default = "default_sample_seed")]
    pub sample_seed: u64,
}

impl SyntheticDatasetSpec {
    pub fn to_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            dim: self.dim,
            num_classes: self.num_classes,
            centroid_seed: self.centroid_seed,
            noise_sigma: self.noise_sigma,
            samples_per_class: self.samples_per_class,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub name: String,
    /// Path to a binary embedding file; mutually exclusive with `synthetic`.
    pub path: Option<PathBuf>,
    pub synthetic: Option<SyntheticDatasetSpec>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct SystemSpec {
    pub name: String,
    /// Free-form hyperparameter overrides; unknown keys are build errors.
    #[serde(flatten)]
    pub params: BTreeMap<String, toml::Value>,
}

impl SystemSpec {
    pub fn bare(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default = "default_h")]
    pub h: usize,
    pub seeds: Vec<u64>,
    pub policies: Vec<String>,
    pub datasets: Vec<DatasetSpec>,
    pub systems: Vec<SystemSpec>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

impl SweepConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: SweepConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.b == 0 {
            return Err(ConfigError::Validation("b must be >= 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Validation("seeds must be non-empty".into()));
        }
        if self.policies.is_empty() {
            return Err(ConfigError::Validation("policies must be non-empty".into()));
        }
        for policy in &self.policies {
            parse_policy(policy)?;
        }
        if self.datasets.is_empty() {
            return Err(ConfigError::Validation("datasets must be non-empty".into()));
        }
        for dataset in &self.datasets {
            if !valid_name(&dataset.name) {
                return Err(ConfigError::Validation(format!(
                    "dataset name {:?} must be [A-Za-z0-9_-]+",
                    dataset.name
                )));
            }
            match (&dataset.path, &dataset.synthetic) {
                (Some(_), Some(_)) => {
                    return Err(ConfigError::Validation(format!(
                        "dataset {:?}: give path or synthetic, not both",
                        dataset.name
                    )))
                }
                (None, None) => {
                    return Err(ConfigError::Validation(format!(
                        "dataset {:?}: needs path or synthetic",
                        dataset.name
                    )))
                }
                _ => {}
            }
        }
        if self.systems.is_empty() {
            return Err(ConfigError::Validation("systems must be non-empty".into()));
        }
        for system in &self.systems {
            if !valid_name(&system.name) {
                return Err(ConfigError::Validation(format!(
                    "system name {:?} must be [A-Za-z0-9_-]+",
                    system.name
                )));
            }
        }
        Ok(())
    }
}

/// Storage-sweep configuration: bounded substrate variants over a budget
/// grid under the oracle policy.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StorageSweepConfig {
    #[serde(default = "default_b")]
    pub b: usize,
    #[serde(default = "default_h")]
    pub h: usize,
    pub seeds: Vec<u64>,
    pub datasets: Vec<DatasetSpec>,
    #[serde(default = "default_budgets")]
    pub budgets: Vec<usize>,
    #[serde(default = "default_evictions")]
    pub evictions: Vec<String>,
}

impl StorageSweepConfig {
    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        let config: StorageSweepConfig = toml::from_str(&text)?;
        Ok(config)
    }

    /// Expands the budget grid into an ordinary sweep.
    pub fn into_sweep(self) -> Result<SweepConfig, ConfigError> {
        let mut systems = Vec::new();
        for eviction in &self.evictions {
            if crate::bounded::EvictionPolicy::parse(eviction).is_none() {
                return Err(ConfigError::Validation(format!(
                    "unknown eviction policy {eviction:?}"
                )));
            }
            for &budget in &self.budgets {
                if budget == 0 {
                    return Err(ConfigError::Validation("budget must be >= 1".into()));
                }
                systems.push(SystemSpec::bare(format!("bounded_{eviction}_{budget}")));
            }
        }
        let config = SweepConfig {
            b: self.b,
            h: self.h,
            seeds: self.seeds,
            policies: vec!["oracle".into()],
            datasets: self.datasets,
            systems,
        };
        config.validate()?;
        Ok(config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
b = 50
h = 10
seeds = [0, 1, 2]
policies = ["oracle", "random-50", "random-10"]

[[datasets]]
name = "synth100"
[datasets.synthetic]
num_classes = 100
samples_per_class = 80

[[systems]]
name = "substrate"
k = 5
margin = 0.05

[[systems]]
name = "online_linear"
"#;

    #[test]
    fn parses_a_full_config() {
        let config = SweepConfig::from_toml_str(GOOD).unwrap();
        assert_eq!(config.b, 50);
        assert_eq!(config.h, 10);
        assert_eq!(config.seeds, vec![0, 1, 2]);
        assert_eq!(config.datasets.len(), 1);
        let synthetic = config.datasets[0].synthetic.as_ref().unwrap();
        assert_eq!(synthetic.dim, 384);
        assert_eq!(synthetic.noise_sigma, 0.05);
        assert_eq!(config.systems[0].params.len(), 2);
        assert!(config.systems[1].params.is_empty());
    }

    #[test]
    fn rejects_bad_policies_and_shapes() {
        let bad = GOOD.replace("\"oracle\"", "\"sometimes\"");
        assert!(SweepConfig::from_toml_str(&bad).is_err());
        let bad = GOOD.replace("seeds = [0, 1, 2]", "seeds = []");
        assert!(SweepConfig::from_toml_str(&bad).is_err());
        let bad = GOOD.replace("name = \"synth100\"", "name = \"../evil\"");
        assert!(SweepConfig::from_toml_str(&bad).is_err());
    }

    #[test]
    fn dataset_needs_exactly_one_source() {
        let bad = r#"
seeds = [0]
policies = ["oracle"]
[[datasets]]
name = "x"
[[systems]]
name = "substrate"
"#;
        assert!(SweepConfig::from_toml_str(bad).is_err());
    }

    #[test]
    fn storage_sweep_expands_the_grid() {
        let text = r#"
seeds = [0, 1, 2]
[[datasets]]
name = "synth"
[datasets.synthetic]
num_classes = 10
samples_per_class = 20
"#;
        let config: StorageSweepConfig = toml::from_str(text).unwrap();
        let sweep = config.into_sweep().unwrap();
        assert_eq!(sweep.policies, vec!["oracle"]);
        let names: Vec<&str> = sweep.systems.iter().map(|s| s.name.as_str()).collect();
        assert_eq!(
            names,
            vec![
                "bounded_reservoir_100",
                "bounded_reservoir_500",
                "bounded_reservoir_1000",
                "bounded_reservoir_5000",
                "bounded_fifo_100",
                "bounded_fifo_500",
                "bounded_fifo_1000",
                "bounded_fifo_5000",
            ]
        );
    }
}
