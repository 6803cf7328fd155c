use std::collections::HashMap;
use std::io::Write;

use driftcheck_core::claims::{
    corrupt_claim, generate_world, load_fever_jsonl, Claim, ClaimSet, Label, Triple, WorldConfig,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(n_entities: usize, n_relations: usize, n_objects: usize, fraction: f64, seed: u64) -> WorldConfig {
    WorldConfig {
        n_entities,
        n_relations,
        n_objects_per_relation: n_objects,
        corpus_fraction: fraction,
        seed,
        ..WorldConfig::default()
    }
}

#[test]
fn desk_world_counts_by_enumeration() {
    let w = generate_world(&config(50, 5, 4, 0.8, 42)).unwrap();
    let corpus_supported = w.truth_corpus.iter().filter(|c| c.label == Some(Label::Supported)).count();
    let test_true = w.test_set.iter().filter(|c| c.label == Some(Label::Supported)).count();
    let test_false = w.test_set.iter().filter(|c| c.label == Some(Label::Refuted)).count();
    assert_eq!((corpus_supported, w.truth_corpus.len()), (200, 200));
    assert_eq!((test_true, test_false), (50, 50));
    assert_eq!(w.test_set.counts().as_tuple(), (50, 50, 0));
}

#[test]
fn smallest_world() {
    let w = generate_world(&config(2, 1, 2, 0.5, 0)).unwrap();
    assert_eq!(w.truth_corpus.len(), 1);
    assert_eq!(w.test_set.counts().as_tuple(), (1, 1, 0));
}

#[test]
fn corruption_frequencies_are_uniform() {
    let w = generate_world(&config(10, 1, 5, 0.5, 3)).unwrap();
    let claim = &w.truth_corpus.claims()[0];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut freq: HashMap<String, usize> = HashMap::new();
    let n = 10_000;
    for _ in 0..n {
        let c = corrupt_claim(claim, &w.world, &mut rng).unwrap();
        *freq.entry(c.triple.unwrap().object).or_default() += 1;
    }
    assert_eq!(freq.len(), 4);
    // binomial(n, 1/4) standard deviation
    let (mean, sd) = (n as f64 / 4.0, (n as f64 * 0.25 * 0.75).sqrt());
    for (object, count) in freq {
        assert!((count as f64 - mean).abs() <= 4.0 * sd, "{object}: {count}");
    }
}

#[test]
fn corruption_needs_a_triple() {
    let w = generate_world(&config(4, 1, 2, 0.5, 0)).unwrap();
    let bare = Claim::new("x", "no triple here", None).unwrap();
    assert!(corrupt_claim(&bare, &w.world, &mut ChaCha8Rng::seed_from_u64(0)).is_err());
}

#[test]
fn synthetic_export_reloads_through_the_fever_loader() {
    let w = generate_world(&config(12, 3, 4, 0.75, 5)).unwrap();
    let mut f = tempfile::NamedTempFile::new().unwrap();
    w.test_set.write_jsonl(&mut f).unwrap();
    f.flush().unwrap();
    let back = load_fever_jsonl(f.path(), None, 0).unwrap();
    assert_eq!(back.claims(), w.test_set.claims());
}

fn fever_lines(n_sup: usize, n_ref: usize) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    for i in 0..n_sup {
        writeln!(f, r#"{{"id": {i}, "claim": "supported claim {i}", "label": "SUPPORTS"}}"#).unwrap();
    }
    for i in 0..n_ref {
        writeln!(f, r#"{{"id": "r{i}", "claim": "refuted claim {i}", "label": "REFUTES", "evidence": []}}"#).unwrap();
    }
    writeln!(f, r#"{{"id": "nei", "claim": "unknown", "label": "NOT ENOUGH INFO"}}"#).unwrap();
    f.flush().unwrap();
    f
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn world_generation_is_pure_and_consistent(
        n_entities in 2usize..30,
        n_relations in 1usize..5,
        n_objects in 2usize..6,
        fraction in 0.3f64..0.9,
        seed in any::<u64>(),
    ) {
        let cfg = config(n_entities, n_relations, n_objects, fraction, seed);
        let Ok(a) = generate_world(&cfg) else {
            // tiny worlds may not split; that must be the only failure mode
            let total = n_entities * n_relations;
            let corpus = (fraction * total as f64).round() as usize;
            prop_assert!(corpus == 0 || corpus >= total);
            return Ok(());
        };
        let b = generate_world(&cfg).unwrap();
        prop_assert_eq!(a.truth_corpus.to_jsonl_string(), b.truth_corpus.to_jsonl_string());
        prop_assert_eq!(a.test_set.to_jsonl_string(), b.test_set.to_jsonl_string());

        let template = a.world.template();
        for c in a.truth_corpus.iter() {
            let t = c.triple.as_ref().unwrap();
            prop_assert_eq!(&template.render(t), &c.text);
            prop_assert_eq!(c.label, Some(Label::Supported));
        }
        let counts = a.test_set.counts();
        prop_assert_eq!(counts.supported, counts.refuted);
        for c in a.test_set.iter().filter(|c| c.label == Some(Label::Refuted)) {
            let t: &Triple = c.triple.as_ref().unwrap();
            let truth = a.world.true_object(&t.subject, &t.relation).unwrap();
            prop_assert_ne!(truth, t.object.as_str());
            prop_assert_eq!(&template.render(t), &c.text);
        }
    }

    #[test]
    fn subsampling_is_exact_and_stable(n_sup in 1usize..20, n_ref in 1usize..20, k in 1usize..25, seed in any::<u64>()) {
        let f = fever_lines(n_sup, n_ref);
        let a: ClaimSet = load_fever_jsonl(f.path(), Some(k), seed).unwrap();
        let b = load_fever_jsonl(f.path(), Some(k), seed).unwrap();
        prop_assert_eq!(a.counts().as_tuple(), (k.min(n_sup), k.min(n_ref), 0));
        prop_assert_eq!(a.skipped(), 1);
        prop_assert_eq!(a.claims(), b.claims());
    }
}
