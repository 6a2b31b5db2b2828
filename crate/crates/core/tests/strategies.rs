//! Transition states and depth-increasing strategies on small instances.

use qls_core::derivatives::{energy, gradient, max_abs};
use qls_core::optimizer::{
    depth_one_bootstrap, descend_from_ts, greedy_step, run_strategy, single_ts_step, StepOptions, Strategy,
    StrategyOptions,
};
use qls_core::transition::{all_transition_states, approx_eigenpair, ReportMode, TsIndex};
use qls_core::{generate_regular_graph, CostDiagonal};

fn cost(seed: u64) -> CostDiagonal {
    CostDiagonal::build(&generate_regular_graph(8, 3, false, seed).unwrap()).unwrap()
}

#[test]
fn bootstrap_finds_stationary_point() {
    let c = cost(1);
    let (p, rec) = depth_one_bootstrap(&c).unwrap();
    assert!(rec.converged);
    assert!(max_abs(&gradient(&c, &p).unwrap()) < 1e-8);
    assert!(rec.energy < 0.0);
}

#[test]
fn transition_states_are_index_one_saddles() {
    let c = cost(3);
    let (p1, _) = depth_one_bootstrap(&c).unwrap();
    let p2 = single_ts_step(&c, &p1, &StepOptions::default()).unwrap().params;
    for min in [p1, p2] {
        let reports = all_transition_states(&c, &min, ReportMode::Validate).unwrap();
        assert_eq!(reports.len(), 2 * min.depth() + 1);
        for r in reports.iter().filter(|r| !r.degenerate) {
            assert!(r.energy_deviation.abs() < 1e-12);
            assert!(r.gradient_norm < 1e-7);
            assert_eq!(r.negative_eigenvalues, Some(1), "{}", r.index.label());
            let l = r.lambda_exact.unwrap();
            assert!(r.ostrowski_lower <= l && l <= r.refined_upper);
            assert!(r.rel_error.unwrap() < 0.2 && r.overlap.unwrap() > 0.95);
        }
    }
}

#[test]
fn both_descents_lower_the_energy() {
    let c = cost(4);
    let (p1, _) = depth_one_bootstrap(&c).unwrap();
    let e_min = energy(&c, &p1).unwrap();
    for index in TsIndex::admissible(1) {
        let pair = approx_eigenpair(&c, &p1, index).unwrap();
        let d = descend_from_ts(&c, &index.construct(&p1).unwrap(), &pair.delta, 1e-3).unwrap();
        for (_, rec) in &d.branches {
            assert!(rec.energy < e_min - 1e-6, "{} {}", index.label(), rec.energy);
        }
    }
}

#[test]
fn greedy_never_worse_than_single_ts_per_step() {
    let c = cost(5);
    let (p1, _) = depth_one_bootstrap(&c).unwrap();
    let g = greedy_step(&c, &p1, &StepOptions::default()).unwrap();
    let s = single_ts_step(&c, &p1, &StepOptions::default()).unwrap();
    assert!(g.record.energy <= s.record.energy + 1e-12);
    assert_eq!(g.launches, 6);
    assert_eq!(s.launches, 2);
    assert!(g.fraction_to_best(3) > 0.0);
}

#[test]
fn traces_are_monotone_and_serializable() {
    let c = cost(6);
    for strategy in [Strategy::Greedy, Strategy::SingleTs, Strategy::Fourier { perturbations: 2, scale: 0.1, seed: 9 }]
    {
        let trace = run_strategy(&c, Some(6), &strategy, 4, &StrategyOptions::default()).unwrap();
        assert_eq!(trace.records.len(), 4);
        assert!(trace.records.iter().enumerate().all(|(i, r)| r.p == i + 1));
        let jsonl = trace.to_jsonl();
        assert_eq!(jsonl.lines().count(), 4);
        let first: serde_json::Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
        assert_eq!(first["p"], 1);
        if strategy != (Strategy::Fourier { perturbations: 2, scale: 0.1, seed: 9 }) {
            assert!(trace.is_monotone(1e-10), "{}", strategy.tag());
        }
    }
}

#[test]
fn fourier_is_reproducible_under_its_seed() {
    let c = cost(7);
    let s = Strategy::Fourier { perturbations: 3, scale: 0.1, seed: 42 };
    let a = run_strategy(&c, Some(7), &s, 3, &StrategyOptions::default()).unwrap();
    let b = run_strategy(&c, Some(7), &s, 3, &StrategyOptions::default()).unwrap();
    assert_eq!(a, b);
}
