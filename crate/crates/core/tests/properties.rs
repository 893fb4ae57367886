mod support;

use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use art_core::adaptive::{allocate_budget, select_for_predicate, AdaptiveConfig, PredicatePools};
use art_core::balanced::{allocate_round_robin, draw};
use art_core::instruction::{generate, CounterNegativeMap, GenerationConfig, NegativeMode};
use art_core::metrics::{evaluate, EvalConfig};
use art_core::model::{partition, BeamLogits, Outcome, PredicateVocabulary, RelationCategory};
use art_core::scoring::{builtin_provider, entropy};

use support::*;

fn availability(counts: &[usize]) -> BTreeMap<String, usize> {
    counts.iter().enumerate().map(|(i, n)| (format!("p{i}"), *n)).collect()
}

fn outcome() -> impl Strategy<Value = Outcome> {
    prop_oneof![
        Just(Outcome::TruePositive),
        Just(Outcome::FalseNegative),
        Just(Outcome::FalsePositive)
    ]
}

fn samples(max: usize) -> impl Strategy<Value = Vec<Sample>> {
    prop::collection::vec((outcome(), 0u32..60, 0u32..20), 1..max).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (outcome, h, s))| Sample {
                id: format!("r{i:03}"),
                outcome,
                entropy: h as f64 / 20.0,
                similarity: s as f64 / 20.0,
            })
            .collect()
    })
}

fn vocab() -> PredicateVocabulary {
    PredicateVocabulary::new([
        ("on", RelationCategory::Spatial),
        ("near", RelationCategory::Spatial),
        ("has", RelationCategory::Possessive),
        ("part of", RelationCategory::Possessive),
        ("wearing", RelationCategory::Semantic),
        ("riding", RelationCategory::Semantic),
    ])
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn entropy_matches_brute_force(
        (m, l, v, values) in (1usize..=4, 1usize..=8, 1usize..=32).prop_flat_map(|(m, l, v)| {
            (Just(m), Just(l), Just(v), prop::collection::vec(-20.0f64..20.0, m * l * v))
        })
    ) {
        let h = entropy(&BeamLogits::new(m, l, v, values.clone()).unwrap());
        prop_assert!((h - brute_entropy(&values, m, l, v)).abs() <= 1e-9);
        prop_assert!(h >= 0.0 && h <= (v as f64).ln());
    }

    #[test]
    fn round_robin_equals_literal_and_is_fair(counts in prop::collection::vec(0usize..40, 1..8), budget in 0usize..200) {
        let av = availability(&counts);
        let got = allocate_round_robin(&av, budget);
        prop_assert_eq!(&got.per_predicate, &literal_round_robin(&av, budget));
        let open: Vec<usize> = got.per_predicate.iter().filter(|(p, g)| **g < av[*p]).map(|(_, g)| *g).collect();
        if let (Some(hi), Some(lo)) = (open.iter().max(), open.iter().min()) {
            prop_assert!(hi - lo <= 1);
        }
    }

    #[test]
    fn budget_allocation_matches_reference(
        rows in prop::collection::vec((0u32..=10, 0usize..30), 1..6),
        budget in 0usize..60,
    ) {
        let recalls: BTreeMap<String, f64> =
            rows.iter().enumerate().map(|(i, (r, _))| (format!("p{i}"), *r as f64 / 10.0)).collect();
        let av: BTreeMap<String, usize> = rows.iter().enumerate().map(|(i, (_, n))| (format!("p{i}"), *n)).collect();
        let got = allocate_budget(&recalls, &av, budget).unwrap();
        prop_assert_eq!(&got.per_predicate, &reference_allocation(&recalls, &av, budget));
        for (p, n) in &got.per_predicate {
            prop_assert!(*n <= av[p]);
        }
        prop_assert!(got.allocated() <= budget);
    }

    #[test]
    fn adaptive_selection_matches_naive(pool in samples(120), fraction in 0.0f64..=1.0) {
        let budget = (pool.len() as f64 * fraction) as usize;
        let mut pp = PredicatePools::default();
        for s in &pool {
            pp.push(s.record("p")).unwrap();
        }
        let cfg = AdaptiveConfig::default();
        let got = select_for_predicate(&pp, budget, &cfg).unwrap();
        let (want, _) = naive_select(&pool, budget, cfg.z_init, cfg.z_step);
        prop_assert_eq!(got.ids.len(), budget);
        let got: BTreeSet<_> = got.ids.into_iter().collect();
        let want: BTreeSet<_> = want.into_iter().collect();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn partition_is_disjoint_exhaustive_and_stratified(
        counts in prop::collection::vec(1usize..40, 2..6),
        seed in any::<u64>(),
        val_fraction in 0.05f64..0.5,
    ) {
        let vocab = vocab();
        let mut triplets = Vec::new();
        for (i, n) in counts.iter().enumerate() {
            for j in 0..*n {
                triplets.push(triplet(&format!("t{i}-{j}"), "img", "man", &vocab.predicates()[i], "horse"));
            }
        }
        let Ok(part) = partition(&triplets, seed, val_fraction) else {
            // Only a pool-emptying split may be refused.
            prop_assert!(((triplets.len() as f64) * val_fraction) as usize >= triplets.len());
            return Ok(());
        };
        part.check().unwrap();
        prop_assert_eq!(part.train().len() + part.pool().len() + part.val().len(), triplets.len());
        prop_assert!(part.train().is_disjoint(part.pool()) && part.pool().is_disjoint(part.val()));
        for (i, n) in counts.iter().enumerate() {
            let p = &vocab.predicates()[i];
            let in_val = part.val().iter().filter(|id| part.predicate_of(id) == Some(p.as_str())).count();
            prop_assert!(in_val >= ((*n as f64) * val_fraction + 1e-9).floor() as usize);
        }
        prop_assert_eq!(partition(&triplets, seed, val_fraction).unwrap(), part.clone());

        let alloc = allocate_round_robin(part.availability(), part.pool().len() / 3);
        let (selected, next) = draw(&part, &alloc, seed).unwrap();
        next.check().unwrap();
        prop_assert_eq!(next.train().len(), selected.len());
        prop_assert_eq!(next.val(), part.val());
    }

    #[test]
    fn counter_negatives_stay_exclusive(
        pred in 0usize..6,
        n in 1usize..5,
        seed in any::<u64>(),
        mode in prop_oneof![Just(NegativeMode::Counter), Just(NegativeMode::Random)],
    ) {
        let vocab = vocab();
        let p = &vocab.predicates()[pred];
        let t = triplet("x", "img", "dog", p, "table");
        let cfg = GenerationConfig { negatives_per_sample: n, negative_mode: mode, seed };
        let inst = generate(std::slice::from_ref(&t), &vocab, &CounterNegativeMap::default(), &cfg).unwrap();
        let cat = vocab.category_of(p).unwrap();
        prop_assert_eq!(inst[0].negative_categories.len(), n);
        prop_assert_eq!(&inst[0].question, &expected_question(&t, cat.name()));
        for c in &inst[0].negative_categories {
            prop_assert_ne!(*c, cat);
            if mode == NegativeMode::Counter {
                prop_assert!(exclusive_with(cat.name()).contains(&c.name()));
            }
        }
    }

    #[test]
    fn generalized_recall_dominates_exact(
        rows in prop::collection::vec((0usize..3, 0usize..4, 0usize..4, 0u8..3, -3.0f64..0.0, prop::option::of(0.5f64..1.0)), 1..25),
    ) {
        let preds = ["on", "has", "near", "wearing"];
        let mut gt = Vec::new();
        let mut records = Vec::new();
        for (i, (img, truth, guess, kind, conf, sim)) in rows.into_iter().enumerate() {
            let id = format!("g{i}");
            gt.push(triplet(&id, &format!("img{img}"), "man", preds[truth], "horse"));
            let text = match kind {
                0 => format!("Yes, man {} horse.", preds[truth]),
                1 => format!("Yes, man {} horse.", preds[guess]),
                _ => "No, there is no prominent spatial relation between man and horse.".into(),
            };
            let mut r = prediction(&id, preds[truth], &text, conf);
            r.similarity = sim;
            records.push(r);
        }
        let cfg = EvalConfig { k_values: vec![1, 2, 4, 8, 50], ..EvalConfig::default() };
        let rep = evaluate(&gt, &records, &cfg, &builtin_provider(32, 0).unwrap(), &BTreeSet::new()).unwrap();
        let mut last = [0.0; 4];
        for m in rep.at_k.values() {
            let now = [m.recall, m.mean_recall, m.generalized_recall, m.generalized_mean_recall];
            prop_assert!(now.iter().all(|v| (0.0..=1.0).contains(v)));
            prop_assert!(m.generalized_recall >= m.recall && m.generalized_mean_recall >= m.mean_recall);
            prop_assert!(now.iter().zip(&last).all(|(a, b)| a >= b));
            last = now;
        }
    }
}
