//! Cross-module invariants.

use std::collections::BTreeSet;

use proptest::prelude::*;

use clinli::audit::{refine, verify};
use clinli::backend::MockBackend;
use clinli::corpus::{generate_corpus, parse_corpus};
use clinli::harness::{run_condition, spearman_rho, ConditionKind, ConditionSpec, RunOptions};
use clinli::ir::*;
use clinli::kb::{ClinicalModel, EvidenceTier, ExclusionAxiom};
use clinli::planner::{plan, precedence_rank};
use clinli::solvers::{maximal_consistent_set, solve, FormalSolver};
use clinli::StructuredPremise;

fn tier(i: usize) -> EvidenceTier {
    EvidenceTier::DEFAULT_ORDER[i % 5]
}

fn mcs_case(
    props: &[usize],
    tiers: &[usize],
    axioms: &[(usize, usize)],
) -> (Vec<Commitment>, AtomTable, ClinicalModel) {
    let mut model = ClinicalModel::reference();
    model.exclusion_axioms = axioms
        .iter()
        .filter(|(a, b)| a != b)
        .map(|(a, b)| ExclusionAxiom {
            atoms: vec![format!("p{a}"), format!("p{b}")],
            rationale: String::new(),
        })
        .collect();
    let atoms = AtomTable(
        props
            .iter()
            .enumerate()
            .map(|(i, p)| Atom::new(&format!("a{i}"), &format!("p{p}"), AtomSource::Premise))
            .collect(),
    );
    let commitments = props
        .iter()
        .enumerate()
        .map(|(i, _)| Commitment::new(&format!("agent{i}"), &format!("a{i}"), tier(tiers[i])))
        .collect();
    (commitments, atoms, model)
}

fn ir_keys(c: &[Commitment], atoms: &AtomTable) -> BTreeSet<AtomKey> {
    c.iter().filter_map(|c| atoms.key_of(&c.proposition)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn mcs_partitions_and_retains_a_consistent_set(
        props in prop::collection::vec(0usize..8, 1..9),
        tiers in prop::collection::vec(0usize..5, 9),
        axioms in prop::collection::vec((0usize..8, 0usize..8), 0..6),
    ) {
        let (commitments, atoms, model) = mcs_case(&props, &tiers, &axioms);
        let r = maximal_consistent_set(&commitments, &atoms, &model);
        let total = r.retained.len() + r.discarded.len() + r.unresolved.iter().map(Vec::len).sum::<usize>();
        prop_assert_eq!(total, commitments.len());
        prop_assert!(model.conflicts(&ir_keys(&r.retained, &atoms)).is_empty());
        // Without any axioms nothing can be dropped.
        if model.exclusion_axioms.is_empty() {
            prop_assert_eq!(r.retained.len(), commitments.len());
        }
    }

    #[test]
    fn mcs_ignores_commitment_order(
        props in prop::collection::vec(0usize..6, 1..8),
        tiers in prop::collection::vec(0usize..5, 8),
        axioms in prop::collection::vec((0usize..6, 0usize..6), 0..5),
        rotate in 0usize..8,
    ) {
        let (commitments, atoms, model) = mcs_case(&props, &tiers, &axioms);
        let mut rotated = commitments.clone();
        let k = rotate % rotated.len();
        rotated.rotate_left(k);
        let a = maximal_consistent_set(&commitments, &atoms, &model);
        let b = maximal_consistent_set(&rotated, &atoms, &model);
        let set = |v: &[Commitment]| v.iter().map(|c| c.agent.clone()).collect::<BTreeSet<_>>();
        prop_assert_eq!(set(&a.retained), set(&b.retained));
        prop_assert_eq!(
            a.discarded.iter().map(|d| d.commitment.agent.clone()).collect::<BTreeSet<_>>(),
            b.discarded.iter().map(|d| d.commitment.agent.clone()).collect::<BTreeSet<_>>()
        );
    }

    #[test]
    fn spearman_is_symmetric_bounded_and_reflexive(
        x in prop::collection::vec(0u8..6, 3..25),
        y_seed in prop::collection::vec(0u8..6, 25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y_seed[..x.len()].iter().map(|v| f64::from(*v)).collect();
        let distinct = |v: &[f64]| v.iter().map(|a| a.to_bits()).collect::<BTreeSet<_>>().len() > 1;
        prop_assume!(distinct(&x) && distinct(&y));
        let r = spearman_rho(&x, &y).unwrap();
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&r));
        prop_assert!((spearman_rho(&y, &x).unwrap() - r).abs() < 1e-12);
        prop_assert!((spearman_rho(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        prop_assert!((spearman_rho(&x, &neg).unwrap() + 1.0).abs() < 1e-12);
        // Ranks only: a monotone transform leaves rho unchanged.
        let cubed: Vec<f64> = y.iter().map(|v| v.powi(3) + 7.0).collect();
        prop_assert!((spearman_rho(&x, &cubed).unwrap() - r).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn corpus_round_trips_and_is_seed_deterministic(seed in any::<u64>()) {
        let model = ClinicalModel::reference();
        let a = generate_corpus(seed, 8, &model).unwrap();
        let text = a.to_jsonl();
        prop_assert_eq!(&text, &generate_corpus(seed, 8, &model).unwrap().to_jsonl());
        let back = parse_corpus(&text, &model).unwrap();
        prop_assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn valid_traces_are_refinement_fixed_points(seed in any::<u64>()) {
        let model = ClinicalModel::reference();
        let corpus = generate_corpus(seed, 8, &model).unwrap();
        for item in &corpus.items {
            let family = item.gold_family.unwrap();
            let ir = item.gold_ir.as_ref().unwrap();
            let (v, trace) = solve(family, ir, &model).unwrap();
            let report = verify(&trace, family, ir, &model);
            prop_assert!(report.valid, "{} flagged", item.id);
            let out = refine(&trace, &report, ir, &model, &FormalSolver);
            prop_assert!(out.edits.is_empty() && !out.changed);
            prop_assert_eq!(out.final_verdict, v);
        }
    }

    #[test]
    fn harm_rescaling_never_moves_risk_verdicts(seed in any::<u64>(), scale in 1e-4f64..1e4) {
        let model = ClinicalModel::reference();
        let scaled = model.with_scaled_harm(scale);
        let corpus = generate_corpus(seed, 8, &model).unwrap();
        for item in &corpus.items {
            if let Some(ir @ StructuredPremise::Risk(_)) = &item.gold_ir {
                let f = item.gold_family.unwrap();
                prop_assert_eq!(solve(f, ir, &model).unwrap().0, solve(f, ir, &scaled).unwrap().0);
            }
        }
    }

    #[test]
    fn planner_picks_the_highest_precedence_signature(seed in any::<u64>()) {
        let model = ClinicalModel::reference();
        let corpus = generate_corpus(seed, 12, &model).unwrap();
        for item in &corpus.items {
            let d = plan(item.gold_ir.as_ref().unwrap(), &model);
            let matched = d.matched.matched();
            if let Some(top) = matched.iter().min_by_key(|f| precedence_rank(**f)) {
                prop_assert_eq!(d.family, *top);
                prop_assert!(!d.defaulted);
            } else {
                prop_assert!(d.defaulted);
            }
            prop_assert_eq!(d.precedence_applied, matched.len() >= 2);
        }
    }

    #[test]
    fn worker_count_does_not_change_the_ledger(seed in any::<u64>(), workers in 1usize..6) {
        let model = ClinicalModel::reference();
        let corpus = generate_corpus(seed, 4, &model).unwrap();
        let spec = ConditionSpec::new(ConditionKind::Carenli, 2);
        let serial = run_condition(&corpus, &spec, &model, &MockBackend, None, &RunOptions { workers: 1 }).unwrap();
        let parallel = run_condition(&corpus, &spec, &model, &MockBackend, None, &RunOptions { workers }).unwrap();
        prop_assert_eq!(serial, parallel);
    }
}
