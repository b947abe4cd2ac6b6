//! Property tests for the structural invariants: chain validity under
//! arbitrary appends, tamper completeness under random mutations, exactness
//! of the brute-force backend, and budget discipline of the bounded store.

use proptest::prelude::*;

use ocrr_core::bounded::{BoundedSubstrate, BudgetConfig, EvictionPolicy};
use ocrr_core::embedding::EmbeddingVector;
use ocrr_core::index::{BruteIndex, VectorIndex};
use ocrr_core::ledger::{ChainStatus, Ledger};
use ocrr_core::vote::{vote, Neighbor, VoteConfig, VoteVariant};

fn unit_vector(raw: Vec<f32>) -> Option<EmbeddingVector> {
    EmbeddingVector::new(raw).ok()
}

fn arb_unit(dim: usize) -> impl Strategy<Value = EmbeddingVector> {
    proptest::collection::vec(-1.0f32..1.0, dim)
        .prop_filter_map("normalizable", |v| unit_vector(v))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn chain_is_valid_after_any_append_sequence(
        payloads in proptest::collection::vec((arb_unit(6), "[a-z]{1,8}"), 1..40)
    ) {
        let mut ledger = Ledger::new();
        for (embedding, label) in payloads {
            ledger.append(embedding, label);
        }
        prop_assert_eq!(ledger.verify_integrity(), ChainStatus::Valid);
    }

    #[test]
    fn any_single_tampering_is_detected(
        target in 0usize..200,
        kind in 0u8..4,
        bit in 0u8..31,
    ) {
        // A fixed 200-entry ledger, one randomized mutation per case.
        let mut ledger = Ledger::new();
        for i in 0..200u32 {
            let angle = i as f32 * 0.37;
            let v = EmbeddingVector::new(vec![angle.cos(), angle.sin(), 0.2, -0.4]).unwrap();
            ledger.append(v, format!("label_{}", i % 11));
        }
        let mut entries = ledger.entries().to_vec();
        match kind {
            0 => {
                // flip a bit in one embedding component
                let mut comps = entries[target].embedding.as_slice().to_vec();
                let lane = (bit % 4) as usize;
                comps[lane] = f32::from_bits(comps[lane].to_bits() ^ (1 << (bit % 20)));
                if let Ok(v) = EmbeddingVector::new(comps) {
                    entries[target].embedding = v;
                } else {
                    entries[target].label.push('!');
                }
            }
            1 => entries[target].label.push('x'),
            2 => {
                // deletion (keep at least one entry)
                entries.remove(target.min(entries.len() - 2));
            }
            _ => {
                // adjacent swap
                let i = target.min(entries.len() - 2);
                entries.swap(i, i + 1);
            }
        }
        let tampered = rebuild_ledger_raw(&entries, ledger.head_hash());
        let status = tampered.verify_integrity();
        prop_assert_ne!(status, ChainStatus::Valid);
        if let ChainStatus::TamperedAt(at) = status {
            prop_assert!(at as usize <= target + 1);
        }
    }

    #[test]
    fn brute_top_k_equals_full_scan_oracle(
        seed in 0u64..5000,
        k in 1usize..8,
    ) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
        let dim = 12;
        let mut index = BruteIndex::new(dim);
        let mut stored: Vec<(u64, Vec<f32>)> = Vec::new();
        for id in 0..300u64 {
            let v: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
            let v = EmbeddingVector::new(v).unwrap().as_slice().to_vec();
            index.insert(id, &v).unwrap();
            stored.push((id, v));
        }
        let q: Vec<f32> = (0..dim).map(|_| rng.gen::<f32>() - 0.5).collect();
        let q = EmbeddingVector::new(q).unwrap().as_slice().to_vec();

        let got = index.top_k(&q, k).unwrap();
        let mut oracle: Vec<(u64, f32)> = stored
            .iter()
            .map(|(id, v)| {
                let s: f32 = q.iter().zip(v).map(|(a, b)| a * b).sum();
                (*id, s.clamp(-1.0, 1.0))
            })
            .collect();
        oracle.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
        oracle.truncate(k);
        let got_ids: Vec<u64> = got.iter().map(|h| h.0).collect();
        let oracle_ids: Vec<u64> = oracle.iter().map(|h| h.0).collect();
        prop_assert_eq!(got_ids, oracle_ids);
        for (g, o) in got.iter().zip(&oracle) {
            prop_assert!((g.1 - o.1).abs() < 1e-5);
            prop_assert!((-1.0..=1.0).contains(&g.1));
        }
    }

    #[test]
    fn bounded_store_never_exceeds_budget_and_fifo_keeps_a_window(
        budget in 1usize..20,
        inserts in 1usize..200,
        eviction_fifo in proptest::bool::ANY,
    ) {
        let eviction = if eviction_fifo { EvictionPolicy::Fifo } else { EvictionPolicy::Reservoir };
        let mut store = BoundedSubstrate::new(
            "bounded",
            BudgetConfig::new(budget, eviction, 3).unwrap(),
            VoteConfig::default(),
        );
        for t in 0..inserts {
            let angle = t as f32 * 0.61;
            let v = EmbeddingVector::new(vec![angle.cos(), angle.sin(), 0.1, 0.2]).unwrap();
            store.bounded_insert(&v, "x");
            prop_assert!(store.live_len() <= budget);
        }
        prop_assert_eq!(store.live_len(), budget.min(inserts));
        if eviction_fifo {
            let lo = inserts.saturating_sub(budget) as u64;
            let expected: Vec<u64> = (lo..inserts as u64).collect();
            prop_assert_eq!(store.live_insert_indices(), expected);
        }
    }

    #[test]
    fn vote_is_pure_and_returns_a_present_label(
        sims in proptest::collection::vec(0.0f32..1.0, 1..10),
        labels in proptest::collection::vec(0u8..4, 1..10),
        variant_idx in 0usize..5,
    ) {
        let n = sims.len().min(labels.len());
        let mut sims = sims[..n].to_vec();
        sims.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let neighbors: Vec<Neighbor<u8>> = sims
            .iter()
            .zip(&labels[..n])
            .enumerate()
            .map(|(i, (s, l))| Neighbor { label: *l, similarity: *s, index: i as u64 })
            .collect();
        let variant = [
            VoteVariant::Full,
            VoteVariant::CountOnly,
            VoteVariant::NoRecency,
            VoteVariant::K1,
            VoteVariant::SumSim,
        ][variant_idx];
        let config = VoteConfig::with_variant(variant);
        let a = vote(&neighbors, &config).unwrap();
        let b = vote(&neighbors, &config).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!(neighbors.iter().any(|n| n.label == a));
    }
}

/// Reassembles a ledger from raw (possibly tampered) entries without
/// recomputing hashes, round-tripping through the binary format exactly as
/// a hostile edit of the persisted log would appear to a reader.
fn rebuild_ledger_raw(entries: &[ocrr_core::ledger::LedgerEntry], head: [u8; 32]) -> Ledger {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("tampered.log");
    save_raw(&path, entries, head);
    Ledger::load(&path).unwrap()
}

fn save_raw(path: &std::path::Path, entries: &[ocrr_core::ledger::LedgerEntry], head: [u8; 32]) {
    use std::io::Write;
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).unwrap());
    w.write_all(b"OCRRLDG1").unwrap();
    for e in entries {
        w.write_all(&[0x01]).unwrap();
        let bytes = ocrr_core::ledger::LedgerEntry::canonical_bytes(
            e.index,
            &e.prev_hash,
            &e.label,
            &e.embedding,
        );
        w.write_all(&bytes).unwrap();
        w.write_all(&e.content_hash).unwrap();
    }
    w.write_all(&[0x02]).unwrap();
    w.write_all(&head).unwrap();
    w.flush().unwrap();
}
