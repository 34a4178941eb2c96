use platon_core::importance::PruneState;
use platon_core::oracle::{self, SuiteHooks};
use platon_core::{
    prune_step, prune_step_structured, select_topk, GroupPartition, ParamState, ScheduleConfig,
    ScoreConfig, ScoreMode,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn full_oracle_suite_passes() {
    let reports = oracle::run_suite(&[], &SuiteHooks::default()).unwrap();
    assert_eq!(reports.len(), oracle::SUBJECTS.len());
    for r in &reports {
        assert!(r.pass, "{r:?}");
    }
}

#[test]
fn suite_filter_keeps_matching_subjects() {
    let reports = oracle::run_suite(&["ema".into()], &SuiteHooks::default()).unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r.subject.starts_with("ema")));
}

#[test]
fn singleton_groups_reduce_to_entrywise_steps() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 9;
    let schedule = ScheduleConfig::new(0.3, 5, 10, 100);
    let cfg = ScoreConfig::default();
    let mut flat = ParamState::dense((0..d).map(|_| rng.random_range(-1.0..1.0)).collect());
    let mut grouped = flat.clone();
    let partition = GroupPartition::singletons(&flat);
    let mut s_flat = PruneState::new(d, ScoreMode::Entrywise);
    let mut s_group = PruneState::new(d, ScoreMode::Structured);
    for _ in 0..100 {
        let grad: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = prune_step(&flat, &s_flat, &grad, 0.05, &schedule, &cfg).unwrap();
        let b = prune_step_structured(&grouped, &s_group, &grad, 0.05, &schedule, &cfg, &partition)
            .unwrap();
        assert_eq!(a.params.values(), b.params.values());
        assert_eq!(a.mask, b.mask);
        assert_eq!(a.scores, b.scores);
        (flat, s_flat) = (a.params, a.state);
        (grouped, s_group) = (b.params, b.state);
    }
}

#[test]
fn select_topk_matches_sort_reference_on_ties() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let n = rng.random_range(1..64);
        let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..4) as f64).collect();
        let k = rng.random_range(0..=n);
        assert_eq!(select_topk(&s, k).unwrap(), oracle::topk_by_sort(&s, k).unwrap());
    }
}
