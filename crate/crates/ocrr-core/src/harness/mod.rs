//! The correction-stream protocol engine: policies, the per-item stream loop
//! with batched checkpointing, and the sweep machinery that fans runs out
//! across datasets, systems, policies, and seeds into CSV results.

mod config;
mod policy;
mod registry;
mod stream;
mod sweep;

pub use config::{
    ConfigError, DatasetSpec, StorageSweepConfig, SweepConfig, SyntheticDatasetSpec, SystemSpec,
};
pub use policy::{parse_policy, CorrectionPolicy, PolicyKind};
pub use registry::{build_system, SystemContext};
pub use stream::{
    corrections_to_threshold, evaluate, run_stream, CheckpointRecord, ToThreshold,
};
pub use sweep::{run_storage_sweep, run_sweep, SummaryRow, SweepError, SweepOutcome};
