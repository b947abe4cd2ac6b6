//! Paired brute-force vs HNSW comparison across corpus scales: both backends
//! are built over the identical synthetic corpus in one process and classify
//! the identical queries with the identical vote rule, so any accuracy gap is
//! attributable to retrieval alone.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::corpus::{class_centroid, sample_around, sample_rng, CorpusError, SyntheticSpec};
use crate::util::mix_seeds;
use crate::vote::{vote, Neighbor, VoteConfig};

use super::{BruteIndex, HnswIndex, HnswParams, VectorIndex};

/// Fraction of the exact top-k the approximate index found.
pub fn recall_at_k(exact_ids: &[u64], approx_ids: &[u64], k: usize) -> f32 {
    debug_assert!(exact_ids.len() <= k && approx_ids.len() <= k);
    if k == 0 {
        return 0.0;
    }
    let hits = approx_ids.iter().filter(|id| exact_ids.contains(id)).count();
    hits as f32 / k as f32
}

#[derive(Debug, Clone, Serialize)]
pub struct ScaleStudyRow {
    pub scale: usize,
    pub brute_acc: f64,
    pub hnsw_acc: f64,
    /// brute_acc - hnsw_acc.
    pub gap: f64,
    pub recall_at_5: f64,
    /// Fraction of queries where both backends voted the same label.
    pub agreement: f64,
    pub hnsw_ms_per_query: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ScaleOutcome {
    Row(ScaleStudyRow),
    Skipped { scale: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct ScaleStudyConfig {
    /// Corpus sizes, ascending. `samples_per_class` in `spec` is overridden
    /// with scale / num_classes at each point.
    pub scales: Vec<usize>,
    pub spec: SyntheticSpec,
    pub sample_seed: u64,
    pub query_seed: u64,
    pub test_queries: usize,
    pub vote: VoteConfig,
    pub hnsw: HnswParams,
    /// Skip scales whose estimated footprint exceeds available memory
    /// instead of aborting the whole study.
    pub memory_guard: bool,
}

impl Default for ScaleStudyConfig {
    fn default() -> Self {
        Self {
            scales: vec![10_000, 100_000, 1_000_000],
            spec: SyntheticSpec::default(),
            sample_seed: 17,
            query_seed: 18,
            test_queries: 1000,
            vote: VoteConfig::default(),
            hnsw: HnswParams::default(),
            memory_guard: true,
        }
    }
}

/// Rough resident-set estimate for one scale point: two vector copies plus
/// the HNSW graph.
fn estimated_bytes(scale: usize, dim: usize, m: usize) -> u64 {
    let per_vector = dim as u64 * 4 * 2 + 16 + (3 * m as u64) * 4 + 96;
    scale as u64 * per_vector
}

fn available_memory_bytes() -> Option<u64> {
    let meminfo = std::fs::read_to_string("/proc/meminfo").ok()?;
    for line in meminfo.lines() {
        if let Some(rest) = line.strip_prefix("MemAvailable:") {
            let kb: u64 = rest.trim().trim_end_matches(" kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

pub fn run_scale_study(
    config: &ScaleStudyConfig,
    progress: &mut dyn FnMut(&str),
) -> Result<Vec<ScaleOutcome>, CorpusError> {
    config.spec.validate()?;
    if config.scales.windows(2).any(|w| w[0] > w[1]) {
        return Err(CorpusError::InvalidSpec("scales must be ascending".into()));
    }
    let mut outcomes = Vec::with_capacity(config.scales.len());
    for &scale in &config.scales {
        if config.memory_guard {
            if let Some(available) = available_memory_bytes() {
                let needed = estimated_bytes(scale, config.spec.dim, config.hnsw.m);
                if needed > available.saturating_mul(9) / 10 {
                    progress(&format!(
                        "scale {scale}: skipped (needs ~{} MiB, {} MiB available)",
                        needed >> 20,
                        available >> 20
                    ));
                    outcomes.push(ScaleOutcome::Skipped {
                        scale,
                        reason: format!(
                            "estimated {} MiB exceeds available {} MiB",
                            needed >> 20,
                            available >> 20
                        ),
                    });
                    continue;
                }
            }
        }
        outcomes.push(ScaleOutcome::Row(run_one_scale(config, scale, progress)?));
    }
    Ok(outcomes)
}

fn run_one_scale(
    config: &ScaleStudyConfig,
    scale: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<ScaleStudyRow, CorpusError> {
    let num_classes = config.spec.num_classes;
    if scale < num_classes {
        return Err(CorpusError::InvalidSpec(format!(
            "scale {scale} smaller than num_classes {num_classes}"
        )));
    }
    let per_class = scale / num_classes;
    let spec = SyntheticSpec {
        samples_per_class: per_class,
        ..config.spec.clone()
    };
    let total = per_class * num_classes;
    let k = config.vote.k;

    progress(&format!("scale {scale}: building both backends over {total} vectors"));
    let mut brute = BruteIndex::new(spec.dim);
    let mut hnsw = HnswIndex::new(spec.dim, config.hnsw.clone());
    let mut class_of: Vec<u32> = Vec::with_capacity(total);
    let centroids: Vec<Vec<f32>> = (0..num_classes).map(|c| class_centroid(&spec, c)).collect();
    let mut id: u64 = 0;
    let build_start = Instant::now();
    for (class, centroid) in centroids.iter().enumerate() {
        let mut rng = sample_rng(config.sample_seed, class);
        for _ in 0..per_class {
            let v = sample_around(centroid, spec.noise_sigma, &mut rng);
            brute.insert(id, &v).expect("sequential ids");
            hnsw.insert(id, &v).expect("sequential ids");
            class_of.push(class as u32);
            id += 1;
            if id % 100_000 == 0 {
                progress(&format!(
                    "scale {scale}: inserted {id}/{total} ({:.0}s)",
                    build_start.elapsed().as_secs_f64()
                ));
            }
        }
    }

    progress(&format!("scale {scale}: evaluating {} queries", config.test_queries));
    let mut query_rngs: Vec<_> = (0..num_classes)
        .map(|c| sample_rng(mix_seeds(config.query_seed, u64::MAX), c))
        .collect();
    let mut brute_correct = 0usize;
    let mut hnsw_correct = 0usize;
    let mut agree = 0usize;
    let mut recall_sum = 0.0f64;
    let mut hnsw_elapsed = 0.0f64;
    for q in 0..config.test_queries {
        let class = (q % num_classes) as u32;
        let query = sample_around(
            &centroids[class as usize],
            spec.noise_sigma,
            &mut query_rngs[class as usize],
        );
        let exact = brute.top_k(&query, k).expect("non-empty index");
        let timer = Instant::now();
        let approx = hnsw.top_k(&query, k).expect("non-empty index");
        hnsw_elapsed += timer.elapsed().as_secs_f64();

        let exact_ids: Vec<u64> = exact.iter().map(|h| h.0).collect();
        let approx_ids: Vec<u64> = approx.iter().map(|h| h.0).collect();
        recall_sum += recall_at_k(&exact_ids, &approx_ids, k) as f64;

        let brute_label = vote(&to_neighbors(&exact, &class_of), &config.vote)
            .expect("non-empty neighbour list");
        let hnsw_label = vote(&to_neighbors(&approx, &class_of), &config.vote)
            .expect("non-empty neighbour list");
        brute_correct += usize::from(brute_label == class);
        hnsw_correct += usize::from(hnsw_label == class);
        agree += usize::from(brute_label == hnsw_label);
    }

    let n = config.test_queries as f64;
    let brute_acc = brute_correct as f64 / n;
    let hnsw_acc = hnsw_correct as f64 / n;
    Ok(ScaleStudyRow {
        scale,
        brute_acc,
        hnsw_acc,
        gap: brute_acc - hnsw_acc,
        recall_at_5: recall_sum / n,
        agreement: agree as f64 / n,
        hnsw_ms_per_query: hnsw_elapsed * 1000.0 / n,
    })
}

fn to_neighbors(hits: &[(u64, f32)], class_of: &[u32]) -> Vec<Neighbor<u32>> {
    hits.iter()
        .map(|&(id, similarity)| Neighbor {
            label: class_of[id as usize],
            similarity,
            index: id,
        })
        .collect()
}

/// Columns are fixed: `scale,brute_acc,hnsw_acc,gap,recall_at_5,agreement,hnsw_ms_per_query`.
/// Skipped scales are recorded in the run metadata, not the CSV.
pub fn write_scale_csv(path: &Path, outcomes: &[ScaleOutcome]) -> std::io::Result<()> {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "scale,brute_acc,hnsw_acc,gap,recall_at_5,agreement,hnsw_ms_per_query"
    )?;
    for outcome in outcomes {
        if let ScaleOutcome::Row(row) = outcome {
            writeln!(
                w,
                "{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.3}",
                row.scale,
                row.brute_acc,
                row.hnsw_acc,
                row.gap,
                row.recall_at_5,
                row.agreement,
                row.hnsw_ms_per_query
            )?;
        }
    }
    w.flush()
}

/// Self-describing run metadata: generator parameters, retrieval parameters,
/// and any skipped scales.
pub fn write_scale_metadata(
    path: &Path,
    config: &ScaleStudyConfig,
    outcomes: &[ScaleOutcome],
) -> std::io::Result<()> {
    #[derive(Serialize)]
    struct Metadata<'a> {
        scales: &'a [usize],
        dim: usize,
        num_classes: usize,
        noise_sigma: f32,
        centroid_seed: u64,
        sample_seed: u64,
        query_seed: u64,
        test_queries: usize,
        vote_k: usize,
        vote_margin: f32,
        vote_variant: &'a str,
        hnsw_m: usize,
        hnsw_ef_construction: usize,
        hnsw_ef_search: usize,
        skipped: Vec<&'a ScaleOutcome>,
    }
    let metadata = Metadata {
        scales: &config.scales,
        dim: config.spec.dim,
        num_classes: config.spec.num_classes,
        noise_sigma: config.spec.noise_sigma,
        centroid_seed: config.spec.centroid_seed,
        sample_seed: config.sample_seed,
        query_seed: config.query_seed,
        test_queries: config.test_queries,
        vote_k: config.vote.k,
        vote_margin: config.vote.margin,
        vote_variant: config.vote.variant.name(),
        hnsw_m: config.hnsw.m,
        hnsw_ef_construction: config.hnsw.ef_construction,
        hnsw_ef_search: config.hnsw.ef_search,
        skipped: outcomes
            .iter()
            .filter(|o| matches!(o, ScaleOutcome::Skipped { .. }))
            .collect(),
    };
    let json = serde_json::to_string_pretty(&metadata)?;
    std::fs::write(path, json)
}
