//! Sweep execution: the cartesian product of datasets, systems, policies,
//! and seeds, with per-cell result files for resumability.
//!
//! Each cell writes its checkpoint rows to `cells/<key>.csv` via a
//! temp-file rename, so an interrupted sweep leaves only whole cells behind.
//! The final CSVs are always assembled by re-reading cell files in config
//! order, which makes a resumed run byte-identical to an uninterrupted one.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

use crate::corpus::{
    generate_synthetic_split, load_embedding_file, split_held_out, CorpusError, HeldOutSplit,
    LabeledExample,
};
use crate::util::derive_seed;

use super::config::{ConfigError, DatasetSpec, StorageSweepConfig, SweepConfig};
use super::policy::{parse_policy, CorrectionPolicy};
use super::registry::{build_system, SystemContext};
use super::stream::{corrections_to_threshold, run_stream, CheckpointRecord, ToThreshold};

pub const CHECKPOINT_HEADER: &str =
    "dataset,system,policy,seed,step,corrections,novel_acc,original_acc,footprint_bytes";
pub const SUMMARY_HEADER: &str = "dataset,system,policy,final_novel_mean,final_novel_std,\
final_orig_mean,final_orig_std,to_10pct,to_70pct,footprint_bytes";

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("cell file {file}: {reason}")]
    CellParse { file: String, reason: String },
}

#[derive(Debug, Clone)]
pub struct SummaryRow {
    pub dataset: String,
    pub system: String,
    pub policy: String,
    pub final_novel_mean: f64,
    pub final_novel_std: f64,
    pub final_orig_mean: f64,
    pub final_orig_std: f64,
    pub to_10pct: ToThreshold,
    pub to_70pct: ToThreshold,
    pub footprint_bytes: u64,
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub checkpoint_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub summary: Vec<SummaryRow>,
    pub cells_run: usize,
    pub cells_cached: usize,
}

fn cell_file_name(dataset: &str, system: &str, policy: &str, seed: u64) -> String {
    format!("{dataset}__{system}__{policy}__s{seed}.csv")
}

fn format_cell_rows(
    dataset: &str,
    system: &str,
    policy: &str,
    seed: u64,
    records: &[CheckpointRecord],
) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(
            out,
            "{dataset},{system},{policy},{seed},{step},{corrections},{novel:.6},{orig:.6},{bytes}",
            step = r.step,
            corrections = r.corrections,
            novel = r.novel_acc,
            orig = r.original_acc,
            bytes = r.footprint_bytes,
        )
        .expect("string write");
    }
    out
}

struct ParsedRow {
    step: u64,
    corrections: u64,
    novel_acc: f64,
    original_acc: f64,
    footprint_bytes: u64,
}

fn parse_cell_file(path: &Path) -> Result<Vec<ParsedRow>, SweepError> {
    let text = std::fs::read_to_string(path)?;
    let file = path.display().to_string();
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 9 {
            return Err(SweepError::CellParse {
                file,
                reason: format!("line {}: {} fields, expected 9", i + 1, fields.len()),
            });
        }
        let parse_err = |what: &str| SweepError::CellParse {
            file: path.display().to_string(),
            reason: format!("line {}: bad {what}", i + 1),
        };
        rows.push(ParsedRow {
            step: fields[4].parse().map_err(|_| parse_err("step"))?,
            corrections: fields[5].parse().map_err(|_| parse_err("corrections"))?,
            novel_acc: fields[6].parse().map_err(|_| parse_err("novel_acc"))?,
            original_acc: fields[7].parse().map_err(|_| parse_err("original_acc"))?,
            footprint_bytes: fields[8].parse().map_err(|_| parse_err("footprint"))?,
        });
    }
    if rows.is_empty() {
        return Err(SweepError::CellParse {
            file: path.display().to_string(),
            reason: "no rows".into(),
        });
    }
    Ok(rows)
}

fn load_dataset(spec: &DatasetSpec) -> Result<Vec<LabeledExample>, SweepError> {
    if let Some(path) = &spec.path {
        return Ok(load_embedding_file(path)?);
    }
    let synthetic = spec.synthetic.as_ref().expect("validated");
    Ok(generate_synthetic_split(
        &synthetic.to_spec(),
        synthetic.sample_seed,
        synthetic.test_per_class,
    )?)
}

/// Population standard deviation.
fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Lower median, with `Never` ordered last; robust to a single "never".
fn median_threshold(values: &mut [ToThreshold]) -> ToThreshold {
    values.sort_by_key(|v| v.as_sortable());
    values[(values.len() - 1) / 2]
}

struct CellTask<'a> {
    dataset: &'a DatasetSpec,
    split: &'a HeldOutSplit,
    class_order: &'a [crate::embedding::ClassLabel],
    dim: usize,
    system: &'a super::config::SystemSpec,
    policy: &'a str,
    seed: u64,
    file: PathBuf,
    ordinal: usize,
}

fn execute_cell(config: &SweepConfig, task: &CellTask, total: usize) -> Result<String, SweepError> {
    let started = Instant::now();
    let (records, note) = run_cell(
        config,
        task.split,
        task.class_order,
        task.dim,
        task.system,
        task.policy,
        task.seed,
    )?;
    let rows = format_cell_rows(
        &task.dataset.name,
        &task.system.name,
        task.policy,
        task.seed,
        &records,
    );
    let tmp = task.file.with_extension("csv.tmp");
    std::fs::write(&tmp, rows)?;
    std::fs::rename(&tmp, &task.file)?;
    let mut message = format!(
        "[{}/{}] {}/{}/{}/s{}: {:.1}s",
        task.ordinal,
        total,
        task.dataset.name,
        task.system.name,
        task.policy,
        task.seed,
        started.elapsed().as_secs_f64()
    );
    if let Some(note) = note {
        message.push_str(&format!(" [note: {note}]"));
    }
    Ok(message)
}

pub fn run_sweep(
    config: &SweepConfig,
    out_dir: &Path,
    force: bool,
    jobs: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<SweepOutcome, SweepError> {
    config.validate()?;
    let cells_dir = out_dir.join("cells");
    std::fs::create_dir_all(&cells_dir)?;

    // Datasets and splits are computed once and shared read-only by every
    // cell (and every worker under --jobs).
    let mut splits: Vec<Vec<(HeldOutSplit, Vec<crate::embedding::ClassLabel>)>> = Vec::new();
    let mut dims: Vec<usize> = Vec::new();
    for dataset_spec in &config.datasets {
        let corpus = load_dataset(dataset_spec)?;
        let dim = corpus.first().map(|e| e.embedding.dim()).ok_or_else(|| {
            ConfigError::Validation(format!("dataset {} is empty", dataset_spec.name))
        })?;
        dims.push(dim);
        let mut per_seed = Vec::new();
        for &seed in &config.seeds {
            let split = split_held_out(&corpus, config.h, seed)?;
            let class_order = split.all_classes();
            per_seed.push((split, class_order));
        }
        splits.push(per_seed);
    }

    let mut cells_cached = 0usize;
    let mut tasks: Vec<CellTask> = Vec::new();
    let total_cells =
        config.datasets.len() * config.seeds.len() * config.systems.len() * config.policies.len();
    let mut ordinal = 0usize;
    for (di, dataset_spec) in config.datasets.iter().enumerate() {
        for (qi, &seed) in config.seeds.iter().enumerate() {
            let (split, class_order) = &splits[di][qi];
            for system_spec in &config.systems {
                for policy_name in &config.policies {
                    ordinal += 1;
                    let file = cells_dir.join(cell_file_name(
                        &dataset_spec.name,
                        &system_spec.name,
                        policy_name,
                        seed,
                    ));
                    if file.exists() && !force {
                        cells_cached += 1;
                        progress(&format!(
                            "[{ordinal}/{total_cells}] {}/{}/{}/s{seed}: cached",
                            dataset_spec.name, system_spec.name, policy_name
                        ));
                        continue;
                    }
                    tasks.push(CellTask {
                        dataset: dataset_spec,
                        split,
                        class_order,
                        dim: dims[di],
                        system: system_spec,
                        policy: policy_name,
                        seed,
                        file,
                        ordinal,
                    });
                }
            }
        }
    }

    let cells_run = tasks.len();
    if jobs <= 1 || tasks.len() <= 1 {
        for task in &tasks {
            progress(&execute_cell(config, task, total_cells)?);
        }
    } else {
        run_tasks_parallel(config, &tasks, total_cells, jobs, progress)?;
    }

    // Assembly: config order (dataset, system, policy, seed), independent of
    // execution and caching.
    let checkpoint_csv = out_dir.join("checkpoints.csv");
    let summary_csv = out_dir.join("summary.csv");
    let mut checkpoints = String::new();
    writeln!(checkpoints, "{CHECKPOINT_HEADER}").expect("string write");
    let mut summary_rows = Vec::new();
    for dataset_spec in &config.datasets {
        for system_spec in &config.systems {
            for policy_name in &config.policies {
                let mut final_novel = Vec::new();
                let mut final_orig = Vec::new();
                let mut to_10 = Vec::new();
                let mut to_70 = Vec::new();
                let mut footprints = Vec::new();
                for &seed in &config.seeds {
                    let file = cells_dir.join(cell_file_name(
                        &dataset_spec.name,
                        &system_spec.name,
                        policy_name,
                        seed,
                    ));
                    checkpoints.push_str(&std::fs::read_to_string(&file)?);
                    let rows = parse_cell_file(&file)?;
                    let records: Vec<CheckpointRecord> = rows
                        .iter()
                        .map(|r| CheckpointRecord {
                            step: r.step,
                            corrections: r.corrections,
                            novel_acc: r.novel_acc,
                            original_acc: r.original_acc,
                            footprint_bytes: r.footprint_bytes,
                        })
                        .collect();
                    let last = records.last().expect("non-empty cell");
                    final_novel.push(last.novel_acc);
                    final_orig.push(last.original_acc);
                    footprints.push(last.footprint_bytes);
                    to_10.push(corrections_to_threshold(&records, 0.10));
                    to_70.push(corrections_to_threshold(&records, 0.70));
                }
                let (novel_mean, novel_std) = mean_std(&final_novel);
                let (orig_mean, orig_std) = mean_std(&final_orig);
                let n = footprints.len() as u64;
                summary_rows.push(SummaryRow {
                    dataset: dataset_spec.name.clone(),
                    system: system_spec.name.clone(),
                    policy: policy_name.clone(),
                    final_novel_mean: novel_mean,
                    final_novel_std: novel_std,
                    final_orig_mean: orig_mean,
                    final_orig_std: orig_std,
                    to_10pct: median_threshold(&mut to_10),
                    to_70pct: median_threshold(&mut to_70),
                    footprint_bytes: (footprints.iter().sum::<u64>() + n / 2) / n,
                });
            }
        }
    }
    write_atomic(&checkpoint_csv, checkpoints.as_bytes())?;

    let mut summary = String::new();
    writeln!(summary, "{SUMMARY_HEADER}").expect("string write");
    for row in &summary_rows {
        writeln!(
            summary,
            "{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}",
            row.dataset,
            row.system,
            row.policy,
            row.final_novel_mean,
            row.final_novel_std,
            row.final_orig_mean,
            row.final_orig_std,
            row.to_10pct,
            row.to_70pct,
            row.footprint_bytes,
        )
        .expect("string write");
    }
    write_atomic(&summary_csv, summary.as_bytes())?;

    Ok(SweepOutcome {
        checkpoint_csv,
        summary_csv,
        summary: summary_rows,
        cells_run,
        cells_cached,
    })
}

fn run_cell(
    config: &SweepConfig,
    split: &HeldOutSplit,
    class_order: &[crate::embedding::ClassLabel],
    dim: usize,
    system_spec: &super::config::SystemSpec,
    policy_name: &str,
    seed: u64,
) -> Result<(Vec<CheckpointRecord>, Option<String>), SweepError> {
    let ctx = SystemContext {
        class_order,
        dim,
        run_seed: seed,
    };
    let mut system = build_system(system_spec, &ctx)?;
    system.seed(&split.seed_set);
    let kind = parse_policy(policy_name)?;
    let mut policy = CorrectionPolicy::new(policy_name, kind, derive_seed(seed, "policy"));
    let records = run_stream(system.as_mut(), split, &mut policy, config.b);
    Ok((records, system.run_metadata()))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = std::fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.flush()?;
    std::fs::rename(&tmp, path)
}

/// Worker pool over the pending cells. Each worker claims tasks off a shared
/// counter and writes its own cell file; progress messages funnel back to the
/// caller through a channel.
fn run_tasks_parallel(
    config: &SweepConfig,
    tasks: &[CellTask],
    total_cells: usize,
    jobs: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<(), SweepError> {
    use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
    use std::sync::{mpsc, Mutex};

    let next = AtomicUsize::new(0);
    let failed = AtomicBool::new(false);
    let first_error: Mutex<Option<SweepError>> = Mutex::new(None);
    let (tx, rx) = mpsc::channel::<String>();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            let tx = tx.clone();
            let next = &next;
            let failed = &failed;
            let first_error = &first_error;
            scope.spawn(move || loop {
                if failed.load(Ordering::Relaxed) {
                    return;
                }
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(task) = tasks.get(i) else { return };
                match execute_cell(config, task, total_cells) {
                    Ok(message) => {
                        let _ = tx.send(message);
                    }
                    Err(e) => {
                        failed.store(true, Ordering::Relaxed);
                        let mut slot = first_error.lock().expect("error slot");
                        slot.get_or_insert(e);
                        return;
                    }
                }
            });
        }
        drop(tx);
        for message in rx {
            progress(&message);
        }
    });
    match first_error.into_inner().expect("error slot") {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Bounded-variant grid under the oracle policy.
pub fn run_storage_sweep(
    config: StorageSweepConfig,
    out_dir: &Path,
    force: bool,
    jobs: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<SweepOutcome, SweepError> {
    let sweep = config.into_sweep()?;
    run_sweep(&sweep, out_dir, force, jobs, progress)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn tiny_config() -> SweepConfig {
        SweepConfig::from_toml_str(
            r#"
b = 10
h = 2
seeds = [0, 1]
policies = ["oracle", "random-50"]

[[datasets]]
name = "tiny"
[datasets.synthetic]
dim = 16
num_classes = 6
samples_per_class = 8
test_per_class = 4
noise_sigma = 0.02

[[systems]]
name = "substrate"

[[systems]]
name = "bounded_fifo_20"
"#,
        )
        .unwrap()
    }

    #[test]
    fn sweep_writes_both_csvs_with_documented_schemas() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = Vec::new();
        let outcome = run_sweep(&tiny_config(), dir.path(), false, 1, &mut |m| {
            log.push(m.to_string())
        })
        .unwrap();
        assert_eq!(outcome.cells_run, 8);
        assert_eq!(outcome.cells_cached, 0);

        let checkpoints = std::fs::read_to_string(&outcome.checkpoint_csv).unwrap();
        let mut lines = checkpoints.lines();
        assert_eq!(lines.next().unwrap(), CHECKPOINT_HEADER);
        let mut seen = HashSet::new();
        for line in lines {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 9);
            assert_eq!(fields[0], "tiny");
            seen.insert((fields[1].to_string(), fields[2].to_string()));
            let _: u64 = fields[4].parse().unwrap();
            let novel: f64 = fields[6].parse().unwrap();
            assert!((0.0..=1.0).contains(&novel));
        }
        assert_eq!(seen.len(), 4, "2 systems x 2 policies");

        let summary = std::fs::read_to_string(&outcome.summary_csv).unwrap();
        let mut lines = summary.lines();
        assert_eq!(lines.next().unwrap(), SUMMARY_HEADER);
        assert_eq!(lines.count(), 4);
    }

    #[test]
    fn rerun_is_fully_cached_and_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let first = run_sweep(&tiny_config(), dir.path(), false, 1, &mut |_| {}).unwrap();
        let bytes_checkpoints = std::fs::read(&first.checkpoint_csv).unwrap();
        let bytes_summary = std::fs::read(&first.summary_csv).unwrap();

        let second = run_sweep(&tiny_config(), dir.path(), false, 1, &mut |_| {}).unwrap();
        assert_eq!(second.cells_run, 0);
        assert_eq!(second.cells_cached, 8);
        assert_eq!(std::fs::read(&second.checkpoint_csv).unwrap(), bytes_checkpoints);
        assert_eq!(std::fs::read(&second.summary_csv).unwrap(), bytes_summary);
    }

    #[test]
    fn interrupted_sweep_resumes_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let config = tiny_config();
        let complete = run_sweep(&config, dir.path(), false, 1, &mut |_| {}).unwrap();
        let reference = std::fs::read(&complete.checkpoint_csv).unwrap();
        let reference_summary = std::fs::read(&complete.summary_csv).unwrap();

        // Simulate an interrupt: drop two cells and the assembled outputs.
        std::fs::remove_file(
            dir.path()
                .join("cells")
                .join(cell_file_name("tiny", "substrate", "oracle", 1)),
        )
        .unwrap();
        std::fs::remove_file(
            dir.path()
                .join("cells")
                .join(cell_file_name("tiny", "bounded_fifo_20", "random-50", 0)),
        )
        .unwrap();
        std::fs::remove_file(&complete.checkpoint_csv).unwrap();
        std::fs::remove_file(&complete.summary_csv).unwrap();

        let resumed = run_sweep(&config, dir.path(), false, 1, &mut |_| {}).unwrap();
        assert_eq!(resumed.cells_run, 2);
        assert_eq!(resumed.cells_cached, 6);
        assert_eq!(std::fs::read(&resumed.checkpoint_csv).unwrap(), reference);
        assert_eq!(std::fs::read(&resumed.summary_csv).unwrap(), reference_summary);
    }

    #[test]
    fn parallel_jobs_produce_identical_outputs() {
        let serial_dir = tempfile::tempdir().unwrap();
        let parallel_dir = tempfile::tempdir().unwrap();
        let serial = run_sweep(&tiny_config(), serial_dir.path(), false, 1, &mut |_| {}).unwrap();
        let parallel =
            run_sweep(&tiny_config(), parallel_dir.path(), false, 3, &mut |_| {}).unwrap();
        assert_eq!(parallel.cells_run, 8);
        assert_eq!(
            std::fs::read(&serial.checkpoint_csv).unwrap(),
            std::fs::read(&parallel.checkpoint_csv).unwrap()
        );
        assert_eq!(
            std::fs::read(&serial.summary_csv).unwrap(),
            std::fs::read(&parallel.summary_csv).unwrap()
        );
    }

    #[test]
    fn force_reruns_everything() {
        let dir = tempfile::tempdir().unwrap();
        run_sweep(&tiny_config(), dir.path(), false, 1, &mut |_| {}).unwrap();
        let again = run_sweep(&tiny_config(), dir.path(), true, 1, &mut |_| {}).unwrap();
        assert_eq!(again.cells_run, 8);
        assert_eq!(again.cells_cached, 0);
    }

    #[test]
    fn storage_sweep_covers_the_budget_grid() {
        let dir = tempfile::tempdir().unwrap();
        let config: StorageSweepConfig = toml::from_str(
            r#"
b = 10
h = 2
seeds = [0]
budgets = [10, 40]
[[datasets]]
name = "tiny"
[datasets.synthetic]
dim = 16
num_classes = 5
samples_per_class = 8
test_per_class = 3
noise_sigma = 0.02
"#,
        )
        .unwrap();
        let outcome = run_storage_sweep(config, dir.path(), false, 1, &mut |_| {}).unwrap();
        assert_eq!(outcome.cells_run, 4, "2 budgets x 2 evictions x 1 seed");
        let systems: HashSet<String> =
            outcome.summary.iter().map(|r| r.system.clone()).collect();
        assert!(systems.contains("bounded_reservoir_10"));
        assert!(systems.contains("bounded_fifo_40"));
    }

    #[test]
    fn median_threshold_is_robust_to_a_single_never() {
        let mut values = vec![
            ToThreshold::At(100),
            ToThreshold::Never,
            ToThreshold::At(120),
        ];
        assert_eq!(median_threshold(&mut values), ToThreshold::At(120));
        let mut values = vec![ToThreshold::Never, ToThreshold::Never, ToThreshold::At(5)];
        assert_eq!(median_threshold(&mut values), ToThreshold::Never);
    }

    #[test]
    fn unknown_system_in_config_fails_the_run() {
        let mut config = tiny_config();
        config.systems[0].name = "mystery".into();
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            run_sweep(&config, dir.path(), false, 1, &mut |_| {}),
            Err(SweepError::Config(ConfigError::UnknownSystem(_)))
        ));
    }

    #[test]
    fn missing_embedding_file_fails_the_run() {
        let config = SweepConfig::from_toml_str(
            r#"
seeds = [0]
policies = ["oracle"]
[[datasets]]
name = "gone"
path = "/nonexistent/file.emb"
[[systems]]
name = "substrate"
"#,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        assert!(run_sweep(&config, dir.path(), false, 1, &mut |_| {}).is_err());
    }
}
