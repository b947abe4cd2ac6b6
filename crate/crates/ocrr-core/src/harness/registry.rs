//! Name-to-system factory for the sweep. Hyperparameter defaults follow the
//! benchmark's reference values; config overrides are validated strictly so
//! a typo fails the run instead of silently running defaults.

use std::collections::BTreeMap;

use crate::baselines::{
    AgemSystem, ClassScore, EwcSystem, HybridConfig, KnnLmSystem, LwfSystem, OnlineLinear,
    OvrSystem, StaticLinear,
};
use crate::bounded::{BoundedSubstrate, BudgetConfig, EvictionPolicy};
use crate::embedding::ClassLabel;
use crate::index::IndexKind;
use crate::substrate::Substrate;
use crate::system::System;
use crate::util::derive_seed;
use crate::vote::{VoteConfig, VoteVariant};

use super::config::{ConfigError, SystemSpec};

pub struct SystemContext<'a> {
    /// Every corpus class, sorted; linear heads pre-allocate all rows.
    pub class_order: &'a [ClassLabel],
    pub dim: usize,
    /// The run seed; per-purpose sub-seeds are derived from it.
    pub run_seed: u64,
}

/// Typed accessor over the free-form override table that records which keys
/// were consumed, so leftovers can be rejected.
struct Params<'a> {
    system: &'a str,
    values: &'a BTreeMap<String, toml::Value>,
    used: Vec<&'a str>,
}

impl<'a> Params<'a> {
    fn new(system: &'a str, values: &'a BTreeMap<String, toml::Value>) -> Self {
        Self {
            system,
            values,
            used: Vec::new(),
        }
    }

    fn err(&self, param: &str) -> ConfigError {
        ConfigError::UnknownParam {
            system: self.system.to_string(),
            param: param.to_string(),
        }
    }

    fn usize(&mut self, key: &'a str, default: usize) -> Result<usize, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => {
                self.used.push(key);
                v.as_integer()
                    .filter(|&i| i >= 0)
                    .map(|i| i as usize)
                    .ok_or_else(|| self.err(key))
            }
        }
    }

    fn f32(&mut self, key: &'a str, default: f32) -> Result<f32, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => {
                self.used.push(key);
                v.as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .map(|f| f as f32)
                    .ok_or_else(|| self.err(key))
            }
        }
    }

    fn str(&mut self, key: &'a str, default: &str) -> Result<String, ConfigError> {
        match self.values.get(key) {
            None => Ok(default.to_string()),
            Some(v) => {
                self.used.push(key);
                v.as_str().map(str::to_string).ok_or_else(|| self.err(key))
            }
        }
    }

    fn bool(&mut self, key: &'a str, default: bool) -> Result<bool, ConfigError> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => {
                self.used.push(key);
                v.as_bool().ok_or_else(|| self.err(key))
            }
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        for key in self.values.keys() {
            if !self.used.contains(&key.as_str()) {
                return Err(self.err(key));
            }
        }
        Ok(())
    }
}

fn vote_config(params: &mut Params, variant: VoteVariant) -> Result<VoteConfig, ConfigError> {
    let k = params.usize("k", 5)?;
    let margin = params.f32("margin", 0.05)?;
    VoteConfig::new(k, margin, variant)
        .map_err(|e| ConfigError::Validation(format!("{}: {e}", params.system)))
}

fn backend(params: &mut Params) -> Result<IndexKind, ConfigError> {
    let name = params.str("backend", "brute")?;
    IndexKind::parse(&name).ok_or_else(|| {
        ConfigError::Validation(format!(
            "{}: unknown backend {name:?} (brute or hnsw)",
            params.system
        ))
    })
}

/// Builds a system by registry name. Substrate ablations are first-class
/// names; bounded variants encode their policy and budget as
/// `bounded_<reservoir|fifo>_<budget>`.
pub fn build_system(
    spec: &SystemSpec,
    ctx: &SystemContext,
) -> Result<Box<dyn System>, ConfigError> {
    let name = spec.name.as_str();
    let mut params = Params::new(name, &spec.params);
    let classes = || ctx.class_order.to_vec();

    let system: Box<dyn System> = match name {
        "substrate" | "substrate_count_only" | "substrate_no_recency" | "substrate_k1"
        | "substrate_sumsim" => {
            let variant = match name {
                "substrate" => VoteVariant::Full,
                "substrate_count_only" => VoteVariant::CountOnly,
                "substrate_no_recency" => VoteVariant::NoRecency,
                "substrate_k1" => VoteVariant::K1,
                _ => VoteVariant::SumSim,
            };
            let config = vote_config(&mut params, variant)?;
            let kind = backend(&mut params)?;
            Box::new(Substrate::new(name, ctx.dim, config, kind))
        }
        "static_knn" => {
            let config = vote_config(&mut params, VoteVariant::Full)?;
            let kind = backend(&mut params)?;
            Box::new(Substrate::new(name, ctx.dim, config, kind).frozen())
        }
        "static_linear" => Box::new(StaticLinear::new(classes(), ctx.dim, ctx.run_seed)),
        "online_linear" => {
            let lr = params.f32("lr", 0.05)?;
            Box::new(OnlineLinear::new(classes(), ctx.dim, lr, ctx.run_seed))
        }
        "ewc" => {
            let lr = params.f32("lr", 0.05)?;
            let lambda = params.f32("lambda_ewc", 1000.0)?;
            let fisher_samples = params.usize("fisher_samples", 2000)?;
            Box::new(EwcSystem::new(
                classes(),
                ctx.dim,
                lr,
                lambda,
                fisher_samples,
                ctx.run_seed,
            ))
        }
        "a_gem" => {
            let lr = params.f32("lr", 0.05)?;
            let memory = params.usize("memory", 1000)?;
            let batch = params.usize("batch", 64)?;
            Box::new(AgemSystem::new(
                classes(),
                ctx.dim,
                lr,
                memory,
                batch,
                ctx.run_seed,
            ))
        }
        "lwf" => {
            let lr = params.f32("lr", 0.05)?;
            let lambda = params.f32("lambda_distill", 1.0)?;
            let temperature = params.f32("temperature", 2.0)?;
            Box::new(LwfSystem::new(
                classes(),
                ctx.dim,
                lr,
                lambda,
                temperature,
                ctx.run_seed,
            ))
        }
        "knn_lm" => {
            let k = params.usize("k", 5)?;
            let lambda_knn = params.f32("lambda_knn", 0.5)?;
            let tau = params.f32("tau", 0.1)?;
            let class_score = match params.str("class_score", "max_sim")?.as_str() {
                "max_sim" => ClassScore::MaxSim,
                "sum_sim" => ClassScore::SumSim,
                other => {
                    return Err(ConfigError::Validation(format!(
                        "knn_lm: unknown class_score {other:?}"
                    )))
                }
            };
            let config = HybridConfig {
                lambda_knn,
                tau,
                class_score,
            };
            Box::new(KnnLmSystem::new(classes(), ctx.dim, k, config, ctx.run_seed))
        }
        "ovr_logreg" => {
            let lr = params.f32("lr", 0.01)?;
            let subsample = params.usize("subsample", 3000)?;
            Box::new(OvrSystem::new(
                classes(),
                ctx.dim,
                lr,
                subsample,
                ctx.run_seed,
            ))
        }
        bounded if bounded.starts_with("bounded_") => {
            let rest = bounded.strip_prefix("bounded_").expect("checked");
            let (eviction, budget) = rest
                .rsplit_once('_')
                .ok_or_else(|| ConfigError::UnknownSystem(name.to_string()))?;
            let eviction = EvictionPolicy::parse(eviction)
                .ok_or_else(|| ConfigError::UnknownSystem(name.to_string()))?;
            let budget: usize = budget
                .parse()
                .map_err(|_| ConfigError::UnknownSystem(name.to_string()))?;
            let config = vote_config(&mut params, VoteVariant::Full)?;
            let with_chain = params.bool("chain", false)?;
            let budget_config =
                BudgetConfig::new(budget, eviction, derive_seed(ctx.run_seed, "eviction"))
                    .map_err(|e| ConfigError::Validation(format!("{name}: {e}")))?;
            let store = BoundedSubstrate::new(name, budget_config, config);
            Box::new(if with_chain { store.with_chain() } else { store })
        }
        _ => return Err(ConfigError::UnknownSystem(name.to_string())),
    };
    params.finish()?;
    Ok(system)
}
