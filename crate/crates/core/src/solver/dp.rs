use std::sync::Arc;

use rayon::prelude::*;

use super::grid::BeliefGrid;
use super::lqg::MatchingStrategy;
use crate::enumerate::HistoryPolicy;
use crate::error::{Error, Result};
use crate::filter::{self, InformationState};
use crate::problem::{ActualKernel, ModelView};

/// Relative slack under which a later control does not beat an earlier one.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `V_t(grid point; x̂)` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    /// `values[t][point][x̂]`.
    values: Vec<Vec<Vec<f64>>>,
    initial_value: f64,
}

impl ValueFunction {
    pub fn horizon(&self) -> usize {
        self.values.len() - 1
    }

    pub fn value(&self, t: usize, point: usize, x_hat: usize) -> f64 {
        self.values[t][point][x_hat]
    }

    pub fn slices(&self, t: usize, point: usize) -> &[f64] {
        &self.values[t][point]
    }

    pub fn len(&self, t: usize) -> usize {
        self.values[t].len()
    }

    pub fn is_empty(&self, t: usize) -> bool {
        self.values[t].is_empty()
    }

    /// `E[V_0(Π_0)]`, averaged over the first observation: the optimal
    /// penalized cost.
    pub fn initial_value(&self) -> f64 {
        self.initial_value
    }
}

/// Argmin table of a grid dynamic program.
#[derive(Debug, Clone, PartialEq)]
pub struct GridStrategy {
    grid: Arc<BeliefGrid>,
    /// `controls[t][point][x̂]` for `t < T`.
    controls: Vec<Vec<Vec<usize>>>,
    scenario_hash: String,
    beta: f64,
}

impl GridStrategy {
    pub fn grid(&self) -> &BeliefGrid {
        &self.grid
    }

    pub fn scenario_hash(&self) -> &str {
        &self.scenario_hash
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn horizon(&self) -> usize {
        self.controls.len()
    }

    pub fn control_at(&self, t: usize, point: usize, x_hat: usize) -> usize {
        self.controls[t][point][x_hat]
    }

    /// Projects `Π_t` and reads the slice of the actual-marginal mode.
    pub fn control(&self, t: usize, pi: &InformationState) -> Result<usize> {
        if t >= self.controls.len() {
            return Err(Error::Domain(format!(
                "no control at t={t}; the horizon is {}",
                self.controls.len()
            )));
        }
        let projection = self.grid.project(t, pi)?;
        Ok(self.controls[t][projection.index][pi.actual_mode()])
    }
}

/// A separated strategy: a function of the information state only.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparatedStrategy {
    Grid(GridStrategy),
    /// Closed-form matching controls of a linear scenario.
    ClosedForm(MatchingStrategy),
}

impl SeparatedStrategy {
    pub fn kind(&self) -> &'static str {
        match self {
            SeparatedStrategy::Grid(_) => "grid",
            SeparatedStrategy::ClosedForm(_) => "closed_form",
        }
    }

    pub fn as_grid(&self) -> Result<&GridStrategy> {
        match self {
            SeparatedStrategy::Grid(g) => Ok(g),
            SeparatedStrategy::ClosedForm(_) => Err(Error::UnsupportedRepresentation(
                "closed-form strategies have no belief grid".into(),
            )),
        }
    }
}

/// Expected penalized stage cost under `Π_t` for control `u`.
fn expected_stage_cost(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    pi: &InformationState,
    u: usize,
) -> f64 {
    let n = pi.n_states();
    let law = view.disturbance_law(pi.t());
    let beta = view.beta();
    let mut total = 0.0;
    for x in 0..n {
        for xh in 0..n {
            let p = pi.prob(x, xh);
            if p == 0.0 {
                continue;
            }
            let mut penalty = 0.0;
            if beta != 0.0 {
                for (&w, pw) in law.iter() {
                    let x_next = view.model_next(x, u, w);
                    for (xh_next, q) in kernel.row(xh, u, w).iter().enumerate() {
                        penalty += pw * q * view.discrepancy(x_next, xh_next);
                    }
                }
            }
            total += p * (view.stage_cost(x, u) + beta * penalty);
        }
    }
    total
}

fn terminal_value(view: &ModelView<'_>, pi: &InformationState) -> f64 {
    pi.model_marginal()
        .iter()
        .enumerate()
        .map(|(x, p)| p * view.terminal_cost(x))
        .sum()
}

/// `E[V_{t+1}(x̂')]` over the actual marginal of the successor belief.
fn continuation(values: &[Vec<f64>], point: usize, next: &InformationState) -> f64 {
    values[point]
        .iter()
        .zip(next.actual_marginal())
        .map(|(v, p)| v * p)
        .sum()
}

/// Q-value of `u` at `Π_t`.
fn q_value(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    grid: &BeliefGrid,
    next_values: &[Vec<f64>],
    pi: &InformationState,
    t: usize,
    u: usize,
) -> Result<f64> {
    let mut q = expected_stage_cost(view, kernel, pi, u);
    let predictive = filter::predictive_observation_probs(view, kernel, &pi.clone().with_time(t), u)?;
    for (y, p) in predictive.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let next = filter::phi_update(view, kernel, &pi.clone().with_time(t), y, u)?;
        let projection = grid.project(t + 1, &next)?;
        q += p * continuation(next_values, projection.index, &next);
    }
    Ok(q)
}

/// Lowest-index argmin with a relative tie tolerance.
fn argmin(qs: &[f64]) -> (usize, f64) {
    let mut best = (0, qs[0]);
    for (u, &q) in qs.iter().enumerate().skip(1) {
        if q < best.1 - TIE_TOLERANCE * best.1.abs().max(1.0) {
            best = (u, q);
        }
    }
    best
}

/// Backward recursion over the grid.
///
/// `V_T(π) = E[c_T(X_T) | π]`; for `t < T`, `V_t(π; x̂)` is the minimum over
/// `u` of the expected penalized stage cost plus `V_{t+1}` at the projected
/// successor belief. The expectation runs over `(x, x̂) ~ π`, so every `x̂`
/// slice of a point carries the same value; the slices are kept so the
/// strategy can be read per actual-state parameter.
pub fn dp_solve(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    grid: Arc<BeliefGrid>,
) -> Result<(ValueFunction, SeparatedStrategy)> {
    if !kernel.matches(view) {
        return Err(Error::Configuration(
            "actual kernel dimensions do not match the scenario".into(),
        ));
    }
    let horizon = view.horizon();
    if grid.horizon() != horizon || grid.n_states() != view.n_states() {
        return Err(Error::Configuration(
            "belief grid was built for a different scenario".into(),
        ));
    }
    let n = view.n_states();
    let nu = view.n_controls();
    let mut values: Vec<Vec<Vec<f64>>> = vec![Vec::new(); horizon + 1];
    let mut controls: Vec<Vec<Vec<usize>>> = vec![Vec::new(); horizon];
    values[horizon] = grid
        .points(horizon)
        .iter()
        .map(|pi| vec![terminal_value(view, pi); n])
        .collect();
    for t in (0..horizon).rev() {
        let next_values = &values[t + 1];
        let solved: Vec<(usize, f64)> = grid
            .points(t)
            .par_iter()
            .map(|pi| {
                let qs = (0..nu)
                    .map(|u| q_value(view, kernel, &grid, next_values, pi, t, u))
                    .collect::<Result<Vec<_>>>()?;
                Ok(argmin(&qs))
            })
            .collect::<Result<_>>()?;
        values[t] = solved.iter().map(|&(_, v)| vec![v; n]).collect();
        controls[t] = solved.iter().map(|&(u, _)| vec![u; n]).collect();
    }

    let mut initial_value = 0.0;
    for y in 0..view.n_observations() {
        let p: f64 = view
            .initial()
            .iter()
            .map(|(&x, px)| px * filter::observation_likelihood(view, 0, y, x))
            .sum();
        if p == 0.0 {
            continue;
        }
        let pi = filter::initial_information_state(view, y)?;
        let projection = grid.project(0, &pi)?;
        initial_value += p * continuation(&values[0], projection.index, &pi);
    }

    let strategy = GridStrategy {
        grid,
        controls,
        scenario_hash: view.scenario_hash(),
        beta: view.beta(),
    };
    Ok((
        ValueFunction {
            values,
            initial_value,
        },
        SeparatedStrategy::Grid(strategy),
    ))
}

/// A grid strategy driven by the exact information state, recomputed from
/// the history with [`filter::phi_update`].
pub struct BeliefPolicy<'a> {
    view: ModelView<'a>,
    kernel: &'a ActualKernel,
    strategy: &'a GridStrategy,
}

impl<'a> BeliefPolicy<'a> {
    pub fn new(view: ModelView<'a>, kernel: &'a ActualKernel, strategy: &'a GridStrategy) -> Self {
        Self {
            view,
            kernel,
            strategy,
        }
    }
}

impl HistoryPolicy for BeliefPolicy<'_> {
    fn control(&self, t: usize, ys: &[usize], us: &[usize]) -> Result<usize> {
        let pi = filter::information_state_along(&self.view, self.kernel, ys, us)?;
        self.strategy.control(t, &pi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::exact_costs;
    use crate::problem::{FiniteParts, FiniteScenario};
    use crate::scenarios::builtin_discrete_toy;
    use crate::scenarios::toy::*;

    fn solve(s: &FiniteScenario) -> (ValueFunction, GridStrategy) {
        let view = s.model_view();
        let kernel = ActualKernel::exact(s);
        let grid = Arc::new(BeliefGrid::reachable(&view, &kernel).unwrap());
        let (vf, strategy) = dp_solve(&view, &kernel, grid).unwrap();
        (vf, strategy.as_grid().unwrap().clone())
    }

    #[test]
    fn zero_costs_give_zero_values_and_lowest_control() {
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            stage_cost: vec![0.0; 4],
            terminal_cost: vec![0.0; 2],
            beta: 0.0,
            ..parts
        })
        .unwrap();
        let (vf, strategy) = solve(&s);
        for t in 0..=2 {
            for i in 0..vf.len(t) {
                assert!(vf.slices(t, i).iter().all(|v| *v == 0.0));
                if t < 2 {
                    for xh in 0..2 {
                        assert_eq!(strategy.control_at(t, i, xh), IDLE);
                    }
                }
            }
        }
    }

    #[test]
    fn toy_optimum_idles_then_repairs() {
        let s = builtin_discrete_toy();
        let (vf, strategy) = solve(&s);
        assert!((vf.initial_value() - 0.1).abs() < 1e-12);
        let kernel = ActualKernel::exact(&s);
        let policy = BeliefPolicy::new(s.model_view(), &kernel, &strategy);
        let costs = exact_costs(&s, &policy).unwrap();
        assert!((costs.penalized - 0.1).abs() < 1e-12);
        assert_eq!(costs.penalty, 0.0);
    }

    #[test]
    fn one_step_value_by_direct_expectation() {
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            horizon: 1,
            disturbance_law: parts.disturbance_law[..1].to_vec(),
            noise_law: parts.noise_law[..2].to_vec(),
            ..parts
        })
        .unwrap();
        let (vf, _) = solve(&s);
        // idle: broken at T with prob 0.2; repair: 0.1 and never broken
        assert!((vf.initial_value() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn slices_carry_equal_values() {
        let (vf, _) = solve(&builtin_discrete_toy());
        for t in 0..=2 {
            for i in 0..vf.len(t) {
                let s = vf.slices(t, i);
                assert!(s.iter().all(|v| *v == s[0]));
            }
        }
    }

    #[test]
    fn argmin_breaks_ties_low() {
        assert_eq!(argmin(&[1.0, 1.0, 0.5]), (2, 0.5));
        assert_eq!(argmin(&[1.0, 1.0 - 1e-15]).0, 0);
    }
}
