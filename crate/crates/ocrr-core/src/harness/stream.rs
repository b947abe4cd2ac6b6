//! The per-run stream loop: predict each item in order, correct when the
//! policy fires, and checkpoint novel/original accuracy every B items plus
//! once at stream end.

use std::fmt;

use crate::corpus::{HeldOutSplit, LabeledExample};
use crate::system::System;

use super::policy::CorrectionPolicy;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointRecord {
    /// Stream items consumed so far; the step-0 record is the pre-stream
    /// evaluation.
    pub step: u64,
    /// Cumulative corrections, non-decreasing across records.
    pub corrections: u64,
    pub novel_acc: f64,
    pub original_acc: f64,
    pub footprint_bytes: u64,
}

/// Accuracy of `system` on a test set. Empty sets score 0.0. Prediction
/// errors (no evidence) count as wrong.
pub fn evaluate(system: &dyn System, test: &[LabeledExample]) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let correct = test
        .iter()
        .filter(|e| matches!(system.predict(&e.embedding), Ok(label) if label == e.label))
        .count();
    correct as f64 / test.len() as f64
}

/// Runs the correction stream over an already-seeded system. Emits a step-0
/// checkpoint, one every `b` items, and one at stream end when the length is
/// not a multiple of `b`.
pub fn run_stream(
    system: &mut dyn System,
    split: &HeldOutSplit,
    policy: &mut CorrectionPolicy,
    b: usize,
) -> Vec<CheckpointRecord> {
    assert!(b >= 1, "checkpoint batch must be >= 1");
    let mut records = Vec::with_capacity(split.stream_set.len() / b + 2);
    let mut corrections: u64 = 0;
    let checkpoint = |system: &dyn System, step: u64, corrections: u64| CheckpointRecord {
        step,
        corrections,
        novel_acc: evaluate(system, &split.novel_test),
        original_acc: evaluate(system, &split.original_test),
        footprint_bytes: system.footprint().bytes,
    };
    records.push(checkpoint(system, 0, corrections));
    let n = split.stream_set.len();
    for (i, item) in split.stream_set.iter().enumerate() {
        let step = (i + 1) as u64;
        let was_wrong = match system.predict(&item.embedding) {
            Ok(label) => label != item.label,
            Err(_) => true,
        };
        if policy.fires(was_wrong) {
            system.correct(&item.embedding, &item.label);
            corrections += 1;
        }
        if step as usize % b == 0 {
            records.push(checkpoint(system, step, corrections));
        }
    }
    if n > 0 && n % b != 0 {
        records.push(checkpoint(system, n as u64, corrections));
    }
    records
}

/// Smallest correction count at which novel accuracy first reached the
/// threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToThreshold {
    At(u64),
    Never,
}

impl ToThreshold {
    /// Ordering sentinel: `Never` sorts after every finite count.
    pub fn as_sortable(&self) -> u64 {
        match self {
            ToThreshold::At(c) => *c,
            ToThreshold::Never => u64::MAX,
        }
    }
}

impl fmt::Display for ToThreshold {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ToThreshold::At(c) => write!(f, "{c}"),
            ToThreshold::Never => f.write_str("never"),
        }
    }
}

pub fn corrections_to_threshold(records: &[CheckpointRecord], threshold: f64) -> ToThreshold {
    records
        .iter()
        .find(|r| r.novel_acc >= threshold)
        .map(|r| ToThreshold::At(r.corrections))
        .unwrap_or(ToThreshold::Never)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{generate_synthetic_split, split_held_out, SyntheticSpec};
    use crate::embedding::{ClassLabel, EmbeddingVector};
    use crate::harness::policy::PolicyKind;
    use crate::system::StorageFootprint;
    use crate::vote::VoteError;

    /// Mock that always answers with one fixed label.
    struct FixedAnswer(ClassLabel);

    impl System for FixedAnswer {
        fn name(&self) -> &str {
            "fixed"
        }
        fn seed(&mut self, _seed_set: &[LabeledExample]) {}
        fn predict(&self, _query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
            Ok(self.0.clone())
        }
        fn correct(&mut self, _embedding: &EmbeddingVector, _label: &ClassLabel) {}
        fn footprint(&self) -> StorageFootprint {
            StorageFootprint::default()
        }
    }

    /// Mock that memorizes exact embeddings it was corrected on.
    struct Memorizer(Vec<(EmbeddingVector, ClassLabel)>);

    impl System for Memorizer {
        fn name(&self) -> &str {
            "memorizer"
        }
        fn seed(&mut self, seed_set: &[LabeledExample]) {
            for e in seed_set {
                self.0.push((e.embedding.clone(), e.label.clone()));
            }
        }
        fn predict(&self, query: &EmbeddingVector) -> Result<ClassLabel, VoteError> {
            self.0
                .iter()
                .find(|(e, _)| e == query)
                .map(|(_, l)| l.clone())
                .ok_or(VoteError::NoEvidence)
        }
        fn correct(&mut self, embedding: &EmbeddingVector, label: &ClassLabel) {
            self.0.push((embedding.clone(), label.clone()));
        }
        fn footprint(&self) -> StorageFootprint {
            StorageFootprint {
                entries: self.0.len() as u64,
                parameters: 0,
                bytes: self.0.len() as u64,
            }
        }
    }

    fn toy_split() -> crate::corpus::HeldOutSplit {
        let spec = SyntheticSpec {
            dim: 16,
            num_classes: 6,
            samples_per_class: 20,
            noise_sigma: 0.0,
            ..Default::default()
        };
        let corpus = generate_synthetic_split(&spec, 5, 4).unwrap();
        split_held_out(&corpus, 2, 3).unwrap()
    }

    #[test]
    fn perfect_system_never_gets_corrected() {
        // A memorizer over a zero-noise corpus answers every stream item
        // right after seeding? No: stream items are novel-class, unseen.
        // Use a stream-free split instead.
        let spec = SyntheticSpec {
            dim: 16,
            num_classes: 4,
            samples_per_class: 10,
            noise_sigma: 0.0,
            ..Default::default()
        };
        let corpus = generate_synthetic_split(&spec, 5, 4).unwrap();
        let split = split_held_out(&corpus, 1, 3).unwrap();
        // Pre-load the memorizer with every stream item so it is never wrong.
        let mut system = Memorizer(Vec::new());
        system.seed(&split.seed_set);
        for item in &split.stream_set {
            system.0.push((item.embedding.clone(), item.label.clone()));
        }
        let mut policy = CorrectionPolicy::new("oracle", PolicyKind::Oracle, 0);
        let records = run_stream(&mut system, &split, &mut policy, 5);
        for r in &records {
            assert_eq!(r.corrections, 0);
        }
    }

    #[test]
    fn always_wrong_system_is_corrected_every_item() {
        let split = toy_split();
        let mut system = FixedAnswer("nonexistent_class".into());
        let mut policy = CorrectionPolicy::new("oracle", PolicyKind::Oracle, 0);
        let b = 5;
        let records = run_stream(&mut system, &split, &mut policy, b);
        for (t, r) in records.iter().enumerate() {
            assert_eq!(r.step, (t * b) as u64);
            assert_eq!(r.corrections, r.step);
        }
    }

    #[test]
    fn random_p_one_matches_oracle_exactly() {
        let split = toy_split();
        let run = |kind: PolicyKind| {
            let mut system = Memorizer(Vec::new());
            system.seed(&split.seed_set);
            let mut policy = CorrectionPolicy::new("p", kind, 9);
            run_stream(&mut system, &split, &mut policy, 7)
        };
        assert_eq!(run(PolicyKind::Oracle), run(PolicyKind::RandomP(1.0)));
    }

    #[test]
    fn stream_end_checkpoint_is_emitted_off_boundary() {
        let split = toy_split(); // stream of 40 items
        let n = split.stream_set.len() as u64;
        let mut system = FixedAnswer("x".into());
        let mut policy = CorrectionPolicy::new("oracle", PolicyKind::Oracle, 0);
        let records = run_stream(&mut system, &split, &mut policy, 7);
        assert_eq!(records.first().unwrap().step, 0);
        assert_eq!(records.last().unwrap().step, n);
        // No duplicate final checkpoint when the boundary lands exactly.
        let records = run_stream(&mut FixedAnswer("x".into()), &split, &mut policy, 8);
        let steps: Vec<u64> = records.iter().map(|r| r.step).collect();
        assert_eq!(steps, vec![0, 8, 16, 24, 32, 40]);
    }

    #[test]
    fn corrections_are_monotone() {
        let split = toy_split();
        let mut system = Memorizer(Vec::new());
        system.seed(&split.seed_set);
        let mut policy = CorrectionPolicy::new("random-50", PolicyKind::RandomP(0.5), 4);
        let records = run_stream(&mut system, &split, &mut policy, 3);
        for w in records.windows(2) {
            assert!(w[1].corrections >= w[0].corrections);
            assert!(w[1].corrections <= w[1].step);
        }
    }

    #[test]
    fn threshold_scan_returns_first_reaching_record() {
        let mk = |novel: f64, corrections: u64| CheckpointRecord {
            step: 0,
            corrections,
            novel_acc: novel,
            original_acc: 0.0,
            footprint_bytes: 0,
        };
        let records = vec![mk(0.0, 0), mk(0.2, 38), mk(0.8, 100)];
        assert_eq!(
            corrections_to_threshold(&records, 0.7),
            ToThreshold::At(100)
        );
        assert_eq!(corrections_to_threshold(&records, 0.0), ToThreshold::At(0));
        assert_eq!(corrections_to_threshold(&records, 0.9), ToThreshold::Never);
        assert_eq!(format!("{}", ToThreshold::Never), "never");
        assert_eq!(format!("{}", ToThreshold::At(12)), "12");
    }

    #[test]
    fn evaluation_does_not_mutate_the_system() {
        use crate::index::IndexKind;
        use crate::substrate::Substrate;
        use crate::vote::VoteConfig;
        let split = toy_split();
        let mut substrate =
            Substrate::new("substrate", 16, VoteConfig::default(), IndexKind::Brute);
        System::seed(&mut substrate, &split.seed_set);
        let head_before = substrate.ledger().head_hash();
        let footprint_before = substrate.footprint();
        let _ = evaluate(&substrate, &split.novel_test);
        let _ = evaluate(&substrate, &split.original_test);
        assert_eq!(substrate.ledger().head_hash(), head_before);
        assert_eq!(substrate.footprint(), footprint_before);
    }
}
