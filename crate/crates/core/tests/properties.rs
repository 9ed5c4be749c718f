use std::sync::Arc;

use proptest::prelude::*;

use sepctl::distribution::Distribution;
use sepctl::enumerate::{
    direct_conditional, reachable_histories, verify_policy_independence, TabularStrategy,
};
use sepctl::filter::information_state_along;
use sepctl::learner::EmpiricalConditional;
use sepctl::problem::{ActualKernel, FiniteParts, FiniteScenario, TransitionTable};
use sepctl::scenarios::{builtin_discrete_toy, parse_scenario, serialize_finite};
use sepctl::solver::{dp_solve, exhaustive_oracle, BeliefGrid};
use sepctl::tv_distance;

fn law(weights: Vec<u8>) -> Distribution<usize> {
    let mut w: Vec<f64> = weights.into_iter().map(f64::from).collect();
    if w.iter().all(|v| *v == 0.0) {
        w[0] = 1.0;
    }
    Distribution::dense_from_weights(w).unwrap()
}

/// Two-state, two-action, horizon-2 scenarios with random laws, tables and
/// costs.
fn finite_scenario() -> impl Strategy<Value = FiniteScenario> {
    (
        prop::collection::vec(0u8..4, 2),
        prop::collection::vec(0u8..4, 2),
        prop::collection::vec(1u8..4, 2),
        prop::collection::vec(0usize..2, 8),
        prop::collection::vec(0usize..2, 8),
        prop::collection::vec(0usize..2, 4),
        prop::collection::vec(0u8..5, 6),
        0u8..4,
    )
        .prop_map(|(x0, w, z, model, actual, obs, costs, beta)| {
            let parts = builtin_discrete_toy().parts();
            FiniteScenario::new(FiniteParts {
                beta: f64::from(beta) * 0.5,
                initial: law(x0),
                disturbance_law: vec![law(w.clone()); 2],
                noise_law: vec![law(z); 3],
                model: TransitionTable::new(2, 2, 2, model).unwrap(),
                actual: TransitionTable::new(2, 2, 2, actual).unwrap(),
                observation: obs,
                stage_cost: costs[..4].iter().map(|c| f64::from(*c) * 0.1).collect(),
                terminal_cost: costs[4..].iter().map(|c| f64::from(*c) * 0.25).collect(),
                ..parts
            })
            .unwrap()
        })
}

fn v0(s: &FiniteScenario) -> f64 {
    let view = s.model_view();
    let kernel = ActualKernel::exact(s);
    let grid = Arc::new(BeliefGrid::reachable(&view, &kernel).unwrap());
    dp_solve(&view, &kernel, grid).unwrap().0.initial_value()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dp_matches_exhaustive_search(s in finite_scenario()) {
        let oracle = exhaustive_oracle(&s).unwrap();
        let value = v0(&s);
        prop_assert!((value - oracle.min_cost).abs() < 1e-10, "V_0 {} oracle {}", value, oracle.min_cost);
    }

    #[test]
    fn filter_matches_direct_conditioning(s in finite_scenario()) {
        let view = s.model_view();
        let kernel = ActualKernel::exact(&s);
        for t in 0..=2 {
            for (ys, us) in reachable_histories(&s, t).unwrap() {
                let recursive = information_state_along(&view, &kernel, &ys, &us).unwrap();
                let direct = direct_conditional(&s, &ys, &us).unwrap();
                prop_assert!(recursive.max_abs_difference(&direct) < 1e-12);
            }
        }
    }

    #[test]
    fn conditionals_do_not_depend_on_strategy(
        s in finite_scenario(),
        a in 0u128..1024,
        b in 0u128..1024,
    ) {
        let a = TabularStrategy::from_index(&s, a).unwrap();
        let b = TabularStrategy::from_index(&s, b).unwrap();
        let report = verify_policy_independence(&s, &a, &b).unwrap();
        prop_assert!(report.max_discrepancy < 1e-12);
    }

    #[test]
    fn value_is_monotone_in_beta(s in finite_scenario(), lo in 0.0f64..2.0, step in 0.0f64..2.0) {
        let low = v0(&s.with_beta(lo).unwrap());
        let high = v0(&s.with_beta(lo + step).unwrap());
        prop_assert!(low <= high + 1e-12, "V_0({}) = {} > V_0({}) = {}", lo, low, lo + step, high);
    }

    #[test]
    fn scenario_files_round_trip(s in finite_scenario()) {
        let back = parse_scenario(&serialize_finite(&s)).unwrap();
        prop_assert_eq!(back.as_finite().unwrap(), &s);
    }

    #[test]
    fn tv_is_a_bounded_symmetric_distance(
        p in prop::collection::vec(0u8..10, 4),
        q in prop::collection::vec(0u8..10, 4),
    ) {
        let (p, q) = (law(p), law(q));
        let d = tv_distance(&p, &q).unwrap();
        prop_assert!((0.0..=1.0 + 1e-15).contains(&d));
        prop_assert_eq!(d, tv_distance(&q, &p).unwrap());
        prop_assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn empirical_queries_are_distributions(
        runs in prop::collection::vec((prop::collection::vec(0usize..2, 2), prop::collection::vec(0usize..3, 3)), 1..40),
        alpha in 0.0f64..2.0,
    ) {
        let mut emp = EmpiricalConditional::new(3, alpha).unwrap();
        for (us, ys) in &runs {
            emp.record_run(us, ys).unwrap();
        }
        let q = emp.query(&runs[0].0).unwrap();
        prop_assert_eq!(q.len(), 27);
        prop_assert!((q.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert_eq!(emp.total(&[]), runs.len() as u64);
    }
}
