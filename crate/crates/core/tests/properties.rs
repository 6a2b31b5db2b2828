//! Invariants of the simulator and the transition-state construction.

use proptest::prelude::*;
use qls_core::derivatives::{energy, energy_and_gradient};
use qls_core::transition::{ostrowski_bounds, TsIndex};
use qls_core::{generate_regular_graph, prepare_qaoa_state, CostDiagonal, ParameterVector, Statevector};

fn cost(n: usize, seed: u64, weighted: bool) -> CostDiagonal {
    CostDiagonal::build(&generate_regular_graph(n, 3, weighted, seed).unwrap()).unwrap()
}

fn params(max_depth: usize) -> impl Strategy<Value = ParameterVector> {
    (1..=max_depth)
        .prop_flat_map(|p| prop::collection::vec(-3.2f64..3.2, 2 * p))
        .prop_map(|flat| ParameterVector::from_flat(&flat).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn evolution_preserves_norm(seed in 0u64..50, weighted: bool, p in params(5)) {
        let c = cost(8, seed, weighted);
        let s = prepare_qaoa_state(&c, &p).unwrap();
        prop_assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cost_layers_merge_when_mixers_vanish(seed in 0u64..50, gammas in prop::collection::vec(-2.0f64..2.0, 1..5)) {
        let c = cost(8, seed, false);
        let p = gammas.len();
        let split = ParameterVector::new(vec![0.0; p], gammas.clone()).unwrap();
        let merged = ParameterVector::new(vec![0.0], vec![gammas.iter().sum()]).unwrap();
        let (a, b) = (prepare_qaoa_state(&c, &split).unwrap(), prepare_qaoa_state(&c, &merged).unwrap());
        for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
            prop_assert!((x - y).norm() < 1e-12);
        }
    }

    #[test]
    fn inserted_identity_layers_keep_energy_and_gradient(seed in 0u64..50, p in params(4)) {
        let c = cost(8, seed, false);
        let (e, g) = energy_and_gradient(&c, &p).unwrap();
        for index in TsIndex::admissible(p.depth()) {
            let ts = index.construct(&p).unwrap();
            let (e_ts, g_ts) = energy_and_gradient(&c, &ts).unwrap();
            prop_assert!((e - e_ts).abs() < 1e-12);
            // Angles carried over keep their partial derivatives.
            let emb = index.embedding(p.depth());
            for (k, &j) in emb.iter().enumerate() {
                prop_assert!((g[k] - g_ts[j]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn energy_is_bounded_by_spectrum(seed in 0u64..50, p in params(4)) {
        let c = cost(8, seed, true);
        let e = energy(&c, &p).unwrap();
        let max = c.values().iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(e >= c.ground_energy() - 1e-12 && e <= max + 1e-12);
    }

    #[test]
    fn ostrowski_bounds_are_ordered(b in -50.0f64..50.0) {
        let o = ostrowski_bounds(b);
        prop_assert!(o.lower <= o.refined_upper && o.refined_upper <= o.upper && o.upper <= 0.0);
        prop_assert!((o.lower * o.upper - b * b).abs() < 1e-9 * (1.0 + b * b));
    }

    #[test]
    fn plus_state_variance_counts_edges(seed in 0u64..50) {
        let c = cost(10, seed, false);
        let plus = Statevector::plus(10).unwrap();
        prop_assert!((plus.energy_variance(&c).unwrap() - c.n_c()).abs() < 1e-10);
        prop_assert!(plus.energy(&c).unwrap().abs() < 1e-12);
    }
}
