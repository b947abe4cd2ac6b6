//! `ocrr`: the benchmark's reproduction surface.
//!
//! Exit codes: 0 success, 1 validation failure (e.g. a tampered ledger),
//! 2 configuration or usage error. Progress goes to stderr; machine-readable
//! output goes to files and stdout only.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ocrr_core::corpus::{
    convert_csv_to_embeddings, generate_synthetic_split, write_embedding_file, SyntheticSpec,
};
use ocrr_core::harness::{
    run_storage_sweep, run_sweep, StorageSweepConfig, SummaryRow, SweepConfig, SweepOutcome,
};
use ocrr_core::index::{
    run_scale_study, write_scale_csv, write_scale_metadata, ScaleStudyConfig,
};
use ocrr_core::ledger::{verify_ledger_file, ChainStatus};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(
    name = "ocrr",
    about = "Online correction recovery benchmark: sweeps, scale study, ledger tools",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep configuration file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config's seed list.
    #[arg(long, num_args = 1..)]
    seeds: Option<Vec<u64>>,
    /// Output directory (default: $OCRR_OUT_DIR or ./results).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Recompute cells even when cached results exist.
    #[arg(long)]
    force: bool,
    /// Parallel sweep cells.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full sweep: datasets x systems x policies x seeds.
    FullSweep(SweepArgs),
    /// Run the bounded-substrate storage sweep under the oracle policy.
    StorageSweep(SweepArgs),
    /// Paired brute-force vs HNSW comparison over synthetic corpus scales.
    ScaleStudy {
        /// Corpus sizes, ascending (default: 10k, 100k, 1M).
        #[arg(long, num_args = 1..)]
        scales: Option<Vec<usize>>,
        #[arg(long, default_value_t = 384)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        classes: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f32,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        /// Append the 10M point (needs tens of GiB of memory).
        #[arg(long)]
        include_10m: bool,
        #[arg(long, default_value_t = 7)]
        centroid_seed: u64,
        #[arg(long, default_value_t = 17)]
        sample_seed: u64,
        #[arg(long, default_value_t = 18)]
        query_seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Replay a persisted ledger file and walk its hash chain.
    VerifyLedger {
        #[arg(long)]
        path: PathBuf,
    },
    /// Convert a CSV of `label,split,components...` rows to the binary format.
    ConvertEmbeddings {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic train/test corpus as a binary embedding file.
    GenSynthetic {
        #[arg(long, default_value_t = 384)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        classes: usize,
        #[arg(long, default_value_t = 100)]
        per_class: usize,
        #[arg(long, default_value_t = 20)]
        test_per_class: usize,
        #[arg(long, default_value_t = 0.05)]
        noise: f32,
        #[arg(long, default_value_t = 7)]
        centroid_seed: u64,
        #[arg(long, default_value_t = 13)]
        sample_seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn default_out_dir() -> PathBuf {
    std::env::var_os("OCRR_OUT_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("results"))
}

fn progress(message: &str) {
    eprintln!("{message}");
}

fn print_summary_table(rows: &[SummaryRow]) {
    println!(
        "{:<12} {:<24} {:<10} {:>12} {:>12} {:>8} {:>8} {:>12}",
        "dataset", "system", "policy", "novel", "orig", "to10%", "to70%", "bytes"
    );
    for r in rows {
        println!(
            "{:<12} {:<24} {:<10} {:>5.3} ±{:>5.3} {:>5.3} ±{:>5.3} {:>8} {:>8} {:>12}",
            r.dataset,
            r.system,
            r.policy,
            r.final_novel_mean,
            r.final_novel_std,
            r.final_orig_mean,
            r.final_orig_std,
            r.to_10pct.to_string(),
            r.to_70pct.to_string(),
            r.footprint_bytes,
        );
    }
}

fn finish_sweep(outcome: SweepOutcome) -> ExitCode {
    eprintln!(
        "{} cells run, {} cached; results in {} and {}",
        outcome.cells_run,
        outcome.cells_cached,
        outcome.checkpoint_csv.display(),
        outcome.summary_csv.display()
    );
    print_summary_table(&outcome.summary);
    ExitCode::SUCCESS
}

fn config_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(EXIT_CONFIG)
}

fn full_sweep(args: SweepArgs) -> ExitCode {
    let mut config = match SweepConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    let out = args.out.unwrap_or_else(default_out_dir);
    match run_sweep(&config, &out, args.force, args.jobs.max(1), &mut progress) {
        Ok(outcome) => finish_sweep(outcome),
        Err(e) => config_error(e),
    }
}

fn storage_sweep(args: SweepArgs) -> ExitCode {
    let mut config = match StorageSweepConfig::from_path(&args.config) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(seeds) = args.seeds {
        config.seeds = seeds;
    }
    let out = args.out.unwrap_or_else(default_out_dir);
    match run_storage_sweep(config, &out, args.force, args.jobs.max(1), &mut progress) {
        Ok(outcome) => finish_sweep(outcome),
        Err(e) => config_error(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn scale_study(
    scales: Option<Vec<usize>>,
    dim: usize,
    classes: usize,
    noise: f32,
    queries: usize,
    include_10m: bool,
    centroid_seed: u64,
    sample_seed: u64,
    query_seed: u64,
    out: Option<PathBuf>,
    force: bool,
) -> ExitCode {
    let mut scales = scales.unwrap_or_else(|| vec![10_000, 100_000, 1_000_000]);
    if include_10m {
        scales.push(10_000_000);
    }
    let out_dir = out.unwrap_or_else(default_out_dir);
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        return config_error(e);
    }
    let csv_path = out_dir.join("scale_study.csv");
    let metadata_path = out_dir.join("scale_study_metadata.json");
    if csv_path.exists() && !force {
        eprintln!("cached: {} (use --force to recompute)", csv_path.display());
        match std::fs::read_to_string(&csv_path) {
            Ok(text) => print!("{text}"),
            Err(e) => return config_error(e),
        }
        return ExitCode::SUCCESS;
    }
    let config = ScaleStudyConfig {
        scales,
        spec: SyntheticSpec {
            dim,
            num_classes: classes,
            noise_sigma: noise,
            centroid_seed,
            ..Default::default()
        },
        sample_seed,
        query_seed,
        test_queries: queries,
        ..Default::default()
    };
    let outcomes = match run_scale_study(&config, &mut progress) {
        Ok(o) => o,
        Err(e) => return config_error(e),
    };
    if let Err(e) = write_scale_csv(&csv_path, &outcomes)
        .and_then(|_| write_scale_metadata(&metadata_path, &config, &outcomes))
    {
        return config_error(e);
    }
    eprintln!("results in {}", csv_path.display());
    match std::fs::read_to_string(&csv_path) {
        Ok(text) => print!("{text}"),
        Err(e) => return config_error(e),
    }
    ExitCode::SUCCESS
}

fn verify_ledger(path: &Path) -> ExitCode {
    match verify_ledger_file(path) {
        Ok(ChainStatus::Valid) => {
            println!("ok");
            ExitCode::SUCCESS
        }
        Ok(ChainStatus::TamperedAt(index)) => {
            println!("tampered at index {index}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn convert_embeddings(csv: &Path, out: &Path) -> ExitCode {
    match convert_csv_to_embeddings(csv, out) {
        Ok((records, dim)) => {
            eprintln!("wrote {records} records of dim {dim} to {}", out.display());
            ExitCode::SUCCESS
        }
        Err(e) => config_error(e),
    }
}

#[allow(clippy::too_many_arguments)]
fn gen_synthetic(
    dim: usize,
    classes: usize,
    per_class: usize,
    test_per_class: usize,
    noise: f32,
    centroid_seed: u64,
    sample_seed: u64,
    out: &Path,
) -> ExitCode {
    let spec = SyntheticSpec {
        dim,
        num_classes: classes,
        centroid_seed,
        noise_sigma: noise,
        samples_per_class: per_class,
    };
    let corpus = match generate_synthetic_split(&spec, sample_seed, test_per_class) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(parent) = out.parent() {
        if !parent.as_os_str().is_empty() {
            if let Err(e) = std::fs::create_dir_all(parent) {
                return config_error(e);
            }
        }
    }
    match write_embedding_file(out, &corpus) {
        Ok(()) => {
            eprintln!(
                "wrote {} examples ({classes} classes, dim {dim}) to {}",
                corpus.len(),
                out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => config_error(e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::FullSweep(args) => full_sweep(args),
        Command::StorageSweep(args) => storage_sweep(args),
        Command::ScaleStudy {
            scales,
            dim,
            classes,
            noise,
            queries,
            include_10m,
            centroid_seed,
            sample_seed,
            query_seed,
            out,
            force,
        } => scale_study(
            scales,
            dim,
            classes,
            noise,
            queries,
            include_10m,
            centroid_seed,
            sample_seed,
            query_seed,
            out,
            force,
        ),
        Command::VerifyLedger { path } => verify_ledger(&path),
        Command::ConvertEmbeddings { csv, out } => convert_embeddings(&csv, &out),
        Command::GenSynthetic {
            dim,
            classes,
            per_class,
            test_per_class,
            noise,
            centroid_seed,
            sample_seed,
            out,
        } => gen_synthetic(
            dim,
            classes,
            per_class,
            test_per_class,
            noise,
            centroid_seed,
            sample_seed,
            &out,
        ),
    }
}
