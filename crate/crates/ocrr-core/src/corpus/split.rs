//! Held-out-class splits: sample H classes uniformly at random, seed the
//! system on the rest, and stream the held-out classes' training examples
//! in shuffled order.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::embedding::ClassLabel;

use super::{CorpusError, LabeledExample, Split};

#[derive(Debug, Clone)]
pub struct HeldOutSplit {
    pub known_classes: BTreeSet<ClassLabel>,
    pub held_out_classes: BTreeSet<ClassLabel>,
    /// Train examples of known classes, corpus order.
    pub seed_set: Vec<LabeledExample>,
    /// Train examples of held-out classes, shuffled under the split seed.
    pub stream_set: Vec<LabeledExample>,
    /// Test examples of held-out classes.
    pub novel_test: Vec<LabeledExample>,
    /// Test examples of known classes.
    pub original_test: Vec<LabeledExample>,
}

impl HeldOutSplit {
    /// All corpus classes in sorted order; linear-head systems allocate one
    /// output row per entry, held-out classes included.
    pub fn all_classes(&self) -> Vec<ClassLabel> {
        self.known_classes
            .iter()
            .chain(self.held_out_classes.iter())
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect()
    }
}

/// Deterministic held-out split: classes sorted lexicographically, H of them
/// chosen uniformly by the seeded generator, stream shuffled by the same
/// generator.
pub fn split_held_out(
    corpus: &[LabeledExample],
    h: usize,
    seed: u64,
) -> Result<HeldOutSplit, CorpusError> {
    let classes: BTreeSet<ClassLabel> = corpus.iter().map(|e| e.label.clone()).collect();
    if h >= classes.len() {
        return Err(CorpusError::InvalidSplit(format!(
            "H = {h} but corpus has only {} classes (need H < classes)",
            classes.len()
        )));
    }
    for class in &classes {
        let has_train = corpus
            .iter()
            .any(|e| e.split == Split::Train && &e.label == class);
        let has_test = corpus
            .iter()
            .any(|e| e.split == Split::Test && &e.label == class);
        if !has_train || !has_test {
            return Err(CorpusError::InvalidSplit(format!(
                "class {class:?} is missing {} examples",
                if has_train { "test" } else { "train" }
            )));
        }
    }

    let sorted: Vec<&ClassLabel> = classes.iter().collect();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let chosen = rand::seq::index::sample(&mut rng, sorted.len(), h);
    let held_out_classes: BTreeSet<ClassLabel> =
        chosen.iter().map(|i| sorted[i].clone()).collect();
    let known_classes: BTreeSet<ClassLabel> = classes
        .iter()
        .filter(|c| !held_out_classes.contains(*c))
        .cloned()
        .collect();

    let seed_set: Vec<LabeledExample> = corpus
        .iter()
        .filter(|e| e.split == Split::Train && known_classes.contains(&e.label))
        .cloned()
        .collect();
    let mut stream_set: Vec<LabeledExample> = corpus
        .iter()
        .filter(|e| e.split == Split::Train && held_out_classes.contains(&e.label))
        .cloned()
        .collect();
    stream_set.shuffle(&mut rng);
    let novel_test: Vec<LabeledExample> = corpus
        .iter()
        .filter(|e| e.split == Split::Test && held_out_classes.contains(&e.label))
        .cloned()
        .collect();
    let original_test: Vec<LabeledExample> = corpus
        .iter()
        .filter(|e| e.split == Split::Test && known_classes.contains(&e.label))
        .cloned()
        .collect();

    Ok(HeldOutSplit {
        known_classes,
        held_out_classes,
        seed_set,
        stream_set,
        novel_test,
        original_test,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic::{class_label, generate_synthetic_split};
    use crate::corpus::SyntheticSpec;

    fn corpus(num_classes: usize) -> Vec<LabeledExample> {
        let spec = SyntheticSpec {
            dim: 8,
            num_classes,
            samples_per_class: 3,
            ..Default::default()
        };
        generate_synthetic_split(&spec, 4, 2).unwrap()
    }

    #[test]
    fn partitions_the_class_set() {
        let corpus = corpus(77);
        let split = split_held_out(&corpus, 10, 0).unwrap();
        assert_eq!(split.known_classes.len(), 67);
        assert_eq!(split.held_out_classes.len(), 10);
        assert!(split.known_classes.is_disjoint(&split.held_out_classes));
        let union: BTreeSet<_> = split
            .known_classes
            .union(&split.held_out_classes)
            .cloned()
            .collect();
        assert_eq!(union.len(), 77);
        for e in &split.stream_set {
            assert!(split.held_out_classes.contains(&e.label));
        }
        for e in &split.seed_set {
            assert!(split.known_classes.contains(&e.label));
        }
    }

    #[test]
    fn h_zero_is_the_degenerate_split() {
        let corpus = corpus(5);
        let split = split_held_out(&corpus, 0, 3).unwrap();
        assert!(split.stream_set.is_empty());
        assert!(split.novel_test.is_empty());
        assert_eq!(split.original_test.len(), 5 * 2);
        assert_eq!(split.seed_set.len(), 5 * 3);
    }

    #[test]
    fn identical_inputs_give_identical_splits() {
        let corpus = corpus(20);
        let a = split_held_out(&corpus, 4, 9).unwrap();
        let b = split_held_out(&corpus, 4, 9).unwrap();
        assert_eq!(a.held_out_classes, b.held_out_classes);
        let order_a: Vec<&str> = a.stream_set.iter().map(|e| e.label.as_str()).collect();
        let order_b: Vec<&str> = b.stream_set.iter().map(|e| e.label.as_str()).collect();
        assert_eq!(order_a, order_b);
        let c = split_held_out(&corpus, 4, 10).unwrap();
        assert!(
            a.held_out_classes != c.held_out_classes
                || a.stream_set.iter().map(|e| &e.label).ne(c.stream_set.iter().map(|e| &e.label)),
            "different seed should change the split or the stream order"
        );
    }

    #[test]
    fn stream_is_shuffled_but_preserves_multiset() {
        let corpus = corpus(10);
        let split = split_held_out(&corpus, 3, 1).unwrap();
        assert_eq!(split.stream_set.len(), 3 * 3);
        let mut by_class = std::collections::HashMap::new();
        for e in &split.stream_set {
            *by_class.entry(e.label.clone()).or_insert(0usize) += 1;
        }
        for class in &split.held_out_classes {
            assert_eq!(by_class[class], 3);
        }
    }

    #[test]
    fn h_too_large_is_rejected() {
        let corpus = corpus(5);
        assert!(matches!(
            split_held_out(&corpus, 5, 0),
            Err(CorpusError::InvalidSplit(_))
        ));
        assert!(matches!(
            split_held_out(&corpus, 6, 0),
            Err(CorpusError::InvalidSplit(_))
        ));
    }

    #[test]
    fn classes_missing_a_split_are_rejected() {
        let mut corpus = corpus(4);
        let victim = class_label(2);
        corpus.retain(|e| !(e.label == victim && e.split == Split::Test));
        assert!(matches!(
            split_held_out(&corpus, 1, 0),
            Err(CorpusError::InvalidSplit(_))
        ));
    }
}
