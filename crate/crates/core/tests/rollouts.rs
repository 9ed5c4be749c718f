use sepctl::enumerate::{exact_belief_factor, exact_costs, history_conditionals};
use sepctl::harness::{
    collect_empirical, matching_audit, monte_carlo_cost, run_parallel, run_rollout,
    HistoryController, LinearFeedback,
};
use sepctl::learner::learned_state_for_history;
use sepctl::problem::{ActualKernel, FiniteParts, FiniteScenario};
use sepctl::scenarios::toy::{IDLE, REPAIR};
use sepctl::scenarios::{builtin_discrete_toy, builtin_lqg};
use sepctl::solver::LinearStrategy;

fn identical_toy() -> FiniteScenario {
    let parts = builtin_discrete_toy().parts();
    FiniteScenario::new(FiniteParts {
        actual: parts.model.clone(),
        ..parts
    })
    .unwrap()
}

#[test]
fn zero_costs_estimate_exactly_zero() {
    let parts = builtin_discrete_toy().parts();
    let s = FiniteScenario::new(FiniteParts {
        stage_cost: vec![0.0; 4],
        terminal_cost: vec![0.0; 2],
        beta: 0.0,
        ..parts
    })
    .unwrap();
    let c = HistoryController::new("idle", |_: usize, _: &[usize], _: &[usize]| IDLE);
    let mc = monte_carlo_cost(&s, &c, 1000, 5).unwrap();
    assert_eq!((mc.actual.mean, mc.penalized.mean), (0.0, 0.0));
    assert_eq!(mc.actual.std_error, 0.0);
}

#[test]
fn toy_estimate_within_three_standard_errors() {
    let s = builtin_discrete_toy();
    let follow = |t: usize, ys: &[usize], _: &[usize]| if ys[t] == 1 { REPAIR } else { IDLE };
    let exact = exact_costs(&s, &follow).unwrap();
    let mc = monte_carlo_cost(&s, &HistoryController::new("follow", follow), 100_000, 0).unwrap();
    assert!(mc.actual.covers(exact.actual, 3.0), "{:?} vs {}", mc.actual, exact.actual);
    assert!(mc.penalized.covers(exact.penalized, 3.0), "{:?} vs {}", mc.penalized, exact.penalized);
}

#[test]
fn identical_systems_never_separate() {
    let s = identical_toy();
    let follow = |t: usize, ys: &[usize], _: &[usize]| if ys[t] == 1 { REPAIR } else { IDLE };
    let c = HistoryController::new("follow", follow);
    for i in 0..200 {
        let tr = run_rollout(&s, &c, 3, i).unwrap();
        assert!(tr.records.iter().all(|r| r.x == r.x_hat && r.y == r.y_hat));
        let audit = matching_audit(&s, &tr);
        assert!(audit.zero_penalty() && audit.costs_equal());
    }
}

#[test]
fn shared_primitives_within_each_step() {
    let s = builtin_lqg();
    let c = LinearFeedback::new("zero", LinearStrategy::zero(2));
    let tr = run_parallel(&s, &c, 17).unwrap();
    for r in &tr.records[..2] {
        // identity observations: each stream sees its own state plus the same noise
        assert!(((r.y - r.x) - (r.y_hat - r.x_hat)).abs() < 1e-12);
    }
}

#[test]
fn mismatched_controller_reports_penalty() {
    let s = builtin_lqg();
    let c = LinearFeedback::new("zero", LinearStrategy::zero(2));
    let tr = run_parallel(&s, &c, 1).unwrap();
    let audit = matching_audit(&s, &tr);
    assert!(!audit.zero_penalty());
    assert!(audit.max_gap > 0.0);
}

#[test]
fn learned_state_converges_to_factorized_state() {
    // under open-loop controls the empirical conditional estimates the
    // open-loop weights that the exact factorization uses
    let s = builtin_discrete_toy();
    let open_loop = |t: usize, _: &[usize], _: &[usize]| if t == 0 { IDLE } else { REPAIR };
    let c = HistoryController::new("open-loop", open_loop);
    let emp = collect_empirical(&s, &c, 100_000, 11, 0.0).unwrap();
    let view = s.model_view();
    let kernel = ActualKernel::exact(&s);
    let truth = history_conditionals(&s, &open_loop).unwrap();
    let mut largest_true_gap: f64 = 0.0;
    for ((ys, us), (p, joint)) in &truth {
        if *p == 0.0 {
            continue;
        }
        let learned = learned_state_for_history(&view, &kernel, &emp, ys, us).unwrap();
        let factorized = exact_belief_factor(&s, ys, us).unwrap().compose().unwrap();
        assert!(learned.state.l1_distance(&factorized) / 2.0 < 0.03);
        largest_true_gap = largest_true_gap.max(learned.state.l1_distance(joint) / 2.0);
    }
    // the factorized state is not the joint conditional once the two
    // systems have moved together for a step
    assert!(largest_true_gap > 0.1, "{largest_true_gap}");
}
