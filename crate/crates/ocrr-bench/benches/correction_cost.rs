//! Per-correction cost of each system family, plus predict cost at a
//! realistic ledger size. The headline comparison: a substrate correction is
//! one hash-chained append, orders of magnitude below a gradient step.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use ocrr_bench::{bench_classes, random_examples, random_unit, BENCH_CLASSES, BENCH_DIM};
use ocrr_core::baselines::{
    agem_step, ewc_step, fisher_estimate, lwf_step, seed_train, LinearHead, MemoryBuffer,
    OvrLogReg,
};
use ocrr_core::embedding::EmbeddingVector;
use ocrr_core::index::IndexKind;
use ocrr_core::substrate::Substrate;
use ocrr_core::vote::VoteConfig;

fn correction_costs(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(0);
    let seed_set = random_examples(1000, 1);
    let x = random_unit(&mut rng, BENCH_DIM);
    let x_embedding = EmbeddingVector::new(x.clone()).unwrap();
    let label = "intent_00".to_string();

    let mut group = c.benchmark_group("per_correction");

    group.bench_function("substrate_append", |b| {
        b.iter_batched_ref(
            || {
                let mut s =
                    Substrate::new("substrate", BENCH_DIM, VoteConfig::default(), IndexKind::Brute);
                s.seed_ledger(&seed_set).unwrap();
                s
            },
            |s| {
                s.append(&x_embedding, &label);
            },
            BatchSize::SmallInput,
        )
    });

    let mut trained = LinearHead::zeros(bench_classes(), BENCH_DIM);
    let mut train_rng = ChaCha12Rng::seed_from_u64(2);
    seed_train(&mut trained, &seed_set, 1, 0.05, &mut train_rng);

    group.bench_function("ce_sgd_step", |b| {
        let mut head = trained.clone();
        b.iter(|| head.ce_sgd_step(&x, &label, 0.05))
    });

    let fisher = fisher_estimate(&trained, &seed_set, 200, &mut rng);
    let anchor = trained.clone();
    group.bench_function("ewc_step", |b| {
        let mut head = trained.clone();
        b.iter(|| ewc_step(&mut head, &x, &label, 0.05, 1000.0, &fisher, &anchor))
    });

    let mut memory = MemoryBuffer::new(1000);
    let mut memory_rng = ChaCha12Rng::seed_from_u64(3);
    for e in &seed_set {
        memory.offer(e, &mut memory_rng);
    }
    group.bench_function("agem_step_batch64", |b| {
        let mut head = trained.clone();
        let mut step_rng = ChaCha12Rng::seed_from_u64(4);
        b.iter(|| agem_step(&mut head, &x, &label, 0.05, &memory, 64, &mut step_rng))
    });

    let teacher = trained.clone();
    group.bench_function("lwf_step", |b| {
        let mut head = trained.clone();
        b.iter(|| lwf_step(&mut head, &teacher, &x, &label, 0.05, 1.0, 2.0))
    });

    group.bench_function("ovr_logreg_update", |b| {
        let mut model = OvrLogReg::zeros(bench_classes(), BENCH_DIM);
        b.iter(|| model.update(&x, &label, 0.01))
    });

    group.finish();
}

fn predict_costs(c: &mut Criterion) {
    let mut rng = ChaCha12Rng::seed_from_u64(7);
    let seed_set = random_examples(10_000, 8);
    let query = EmbeddingVector::new(random_unit(&mut rng, BENCH_DIM)).unwrap();

    let mut group = c.benchmark_group("predict_10k_ledger");
    group.sample_size(30);

    let mut brute = Substrate::new("substrate", BENCH_DIM, VoteConfig::default(), IndexKind::Brute);
    brute.seed_ledger(&seed_set).unwrap();
    group.bench_function("brute", |b| b.iter(|| brute.predict_full(&query).unwrap()));

    let mut hnsw = Substrate::new("substrate", BENCH_DIM, VoteConfig::default(), IndexKind::Hnsw);
    hnsw.seed_ledger(&seed_set).unwrap();
    group.bench_function("hnsw", |b| b.iter(|| hnsw.predict_full(&query).unwrap()));

    let mut head = LinearHead::zeros(bench_classes(), BENCH_DIM);
    let mut train_rng = ChaCha12Rng::seed_from_u64(9);
    seed_train(&mut head, &seed_set[..1000], 1, 0.05, &mut train_rng);
    let q = query.as_slice().to_vec();
    group.bench_function("linear_head", |b| b.iter(|| head.predict_row(&q)));

    group.finish();
    let _ = BENCH_CLASSES;
}

criterion_group!(benches, correction_costs, predict_costs);
criterion_main!(benches);
