use crate::distribution::{Distribution, Gaussian1D};
use crate::error::{Error, Result};
use crate::problem::{
    FiniteParts, FiniteScenario, LinearGaussianScenario, LinearObservation, LinearParts,
    LinearStep, QuadraticCost, Scenario, TransitionTable,
};

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 2] = ["lqg", "toy"];

pub fn builtin(name: &str) -> Result<Scenario> {
    match name {
        "lqg" => Ok(builtin_lqg().into()),
        "toy" | "discrete_toy" => Ok(builtin_discrete_toy().into()),
        other => Err(Error::Configuration(format!(
            "unknown builtin scenario {other:?} (expected one of {BUILTIN_NAMES:?})"
        ))),
    }
}

/// The two-step scalar example: actual system `x̂₁ = x̂₀ + u₀ + w₀`,
/// `x̂₂ = x̂₁ + u₁`; model `x₁ = 2x₀ + 3u₀ + 4w₀`, `x₂ = 2x₁ + 4u₁`; identity
/// observations; cost `½(x₂² + u₁²)`; X₀, W₀ standard Gaussian with
/// covariance 0.5; β = 1.
pub fn builtin_lqg() -> LinearGaussianScenario {
    LinearGaussianScenario::new(LinearParts {
        name: "lqg".into(),
        horizon: 2,
        beta: 1.0,
        model: vec![LinearStep::new(2.0, 3.0, 4.0), LinearStep::new(2.0, 4.0, 0.0)],
        actual: vec![LinearStep::new(1.0, 1.0, 1.0), LinearStep::new(1.0, 1.0, 0.0)],
        observation: vec![LinearObservation::IDENTITY; 3],
        stage_cost: vec![
            QuadraticCost {
                state: 0.0,
                control: 0.0,
            },
            QuadraticCost {
                state: 0.0,
                control: 0.5,
            },
        ],
        terminal_cost: 0.5,
        initial: Gaussian1D::standard(),
        disturbance: vec![Gaussian1D::standard(), Gaussian1D::standard()],
        noise: vec![Gaussian1D::point(0.0); 3],
        initial_disturbance_covariance: 0.5,
        control_bounds: None,
    })
    .expect("builtin lqg scenario is valid")
}

pub const OK: usize = 0;
pub const BROKEN: usize = 1;
pub const IDLE: usize = 0;
pub const REPAIR: usize = 1;
pub const CALM: usize = 0;
pub const SHOCK: usize = 1;

/// Two-state machine that is either `ok` or `broken`, seen through a sensor
/// that misreads with probability 0.1.
///
/// `idle` lets a shock (probability 0.2) flip the state; `repair` costs 0.1
/// and returns the machine to `ok`. Being `broken` at the end costs 1. The
/// model believes a shock can also knock a broken machine back to `ok`; the
/// actual machine stays broken. That single table entry is the whole
/// model/actual mismatch. The machine starts `ok`.
pub fn builtin_discrete_toy() -> FiniteScenario {
    let model = |x: usize, u: usize, w: usize| match (u, w) {
        (REPAIR, _) => OK,
        (_, CALM) => x,
        _ => 1 - x,
    };
    let actual = move |x: usize, u: usize, w: usize| {
        if (x, u, w) == (BROKEN, IDLE, SHOCK) {
            BROKEN
        } else {
            model(x, u, w)
        }
    };
    let labels = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    let horizon = 2;
    FiniteScenario::new(FiniteParts {
        name: "discrete_toy".into(),
        horizon,
        beta: 1.0,
        states: labels(&["ok", "broken"]),
        state_values: vec![0.0, 1.0],
        controls: labels(&["idle", "repair"]),
        observations: labels(&["reads_ok", "reads_broken"]),
        disturbances: labels(&["calm", "shock"]),
        noises: labels(&["keep", "flip"]),
        initial: Distribution::dense(vec![1.0, 0.0]).unwrap(),
        disturbance_law: vec![Distribution::dense(vec![0.8, 0.2]).unwrap(); horizon],
        noise_law: vec![Distribution::dense(vec![0.9, 0.1]).unwrap(); horizon + 1],
        model: TransitionTable::from_fn(2, 2, 2, model).unwrap(),
        actual: TransitionTable::from_fn(2, 2, 2, actual).unwrap(),
        // keep reports the state, flip reports the other one
        observation: vec![0, 1, 1, 0],
        stage_cost: vec![0.0, 0.1, 0.0, 0.1],
        terminal_cost: vec![0.0, 1.0],
    })
    .expect("builtin toy scenario is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::Plant;

    #[test]
    fn lqg_matches_worked_example() {
        let s = builtin_lqg();
        assert_eq!(s.horizon(), 2);
        assert_eq!(s.step_model(0, 1.0, 0.0, 0.0).unwrap(), 2.0);
        assert_eq!(s.step_actual(0, 0.0, 0.0, 0.0).unwrap(), 0.0);
        // hand-entered coefficients
        for (x, u, w) in [(1.0, 2.0, -0.5), (-0.3, 0.7, 1.1), (0.25, -4.0, 0.0)] {
            assert_eq!(s.step_model(0, x, u, w).unwrap(), 2.0 * x + 3.0 * u + 4.0 * w);
            assert_eq!(s.step_model(1, x, u, w).unwrap(), 2.0 * x + 4.0 * u);
            assert_eq!(s.step_actual(0, x, u, w).unwrap(), x + u + w);
            assert_eq!(s.step_actual(1, x, u, w).unwrap(), x + u);
        }
        assert_eq!(s.beta(), 1.0);
        assert_eq!(s.initial_disturbance_covariance(), 0.5);
    }

    #[test]
    fn toy_shape() {
        let s = builtin_discrete_toy();
        assert_eq!(s.horizon(), 2);
        for n in [
            s.n_states(),
            s.n_controls(),
            s.n_observations(),
            s.disturbances().len(),
            s.noises().len(),
        ] {
            assert_eq!(n, 2);
        }
        assert_eq!(s.model_table().differences(s.actual_table()), 1);
        assert_eq!(s.terminal_cost_of(BROKEN), 1.0);
        assert_eq!(s.terminal_cost_of(OK), 0.0);
    }

    #[test]
    fn toy_domain_closure() {
        let s = builtin_discrete_toy();
        for t in 0..s.horizon() {
            for x in 0..2 {
                for u in 0..2 {
                    for w in 0..2 {
                        assert!(s.step_model(t, x, u, w).unwrap() < 2);
                        assert!(s.step_actual(t, x, u, w).unwrap() < 2);
                    }
                }
            }
        }
    }

    #[test]
    fn unknown_builtin() {
        assert!(builtin("nope").is_err());
        assert!(builtin("toy").is_ok());
    }
}
