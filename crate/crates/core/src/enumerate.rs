//! Brute-force ground truth for finite scenarios.
//!
//! Everything here works by listing every realization of the primitive
//! random variables with its probability and simulating both systems
//! forward. It is exponential in the horizon and meant for the small
//! instances the other modules are checked against.

use std::collections::BTreeMap;

use crate::distribution::Distribution;
use crate::error::{Error, Result};
use crate::filter::{self, BeliefFactor, InformationState};
use crate::problem::{ActualKernel, FiniteScenario, Plant};

/// Largest number of primitive outcomes or strategies we agree to list.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// One realization of `(X₀, W_{0:T-1}, Z_{0:T})` and its probability.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub x0: usize,
    pub w: Vec<usize>,
    pub z: Vec<usize>,
    pub prob: f64,
}

fn checked_pow(base: usize, exp: usize) -> Option<u128> {
    (base as u128).checked_pow(exp as u32)
}

/// Every primitive outcome of positive probability.
pub fn enumerate_outcomes(s: &FiniteScenario) -> Result<Vec<Outcome>> {
    let horizon = s.horizon();
    let count = checked_pow(s.disturbances().len(), horizon)
        .and_then(|a| checked_pow(s.noises().len(), horizon + 1).and_then(|b| a.checked_mul(b)))
        .and_then(|c| c.checked_mul(s.n_states() as u128))
        .unwrap_or(u128::MAX);
    if count > ENUMERATION_LIMIT {
        return Err(Error::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let mut out = vec![Outcome {
        x0: 0,
        w: Vec::new(),
        z: Vec::new(),
        prob: 1.0,
    }];
    out = out
        .into_iter()
        .flat_map(|o| {
            s.initial()
                .iter()
                .filter(|(_, p)| *p > 0.0)
                .map(|(&x0, p)| Outcome {
                    x0,
                    prob: o.prob * p,
                    ..o.clone()
                })
                .collect::<Vec<_>>()
        })
        .collect();
    for t in 0..horizon {
        out = out
            .into_iter()
            .flat_map(|o| {
                s.disturbance_law(t)
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(&w, p)| {
                        let mut next = o.clone();
                        next.w.push(w);
                        next.prob *= p;
                        next
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    for t in 0..=horizon {
        out = out
            .into_iter()
            .flat_map(|o| {
                s.noise_law(t)
                    .iter()
                    .filter(|(_, p)| *p > 0.0)
                    .map(|(&z, p)| {
                        let mut next = o.clone();
                        next.z.push(z);
                        next.prob *= p;
                        next
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    Ok(out)
}

/// A control law that may read the whole model-observation history,
/// `u_t = g_t(y_{0:t}, u_{0:t-1})`.
pub trait HistoryPolicy: Sync {
    fn control(&self, t: usize, ys: &[usize], us: &[usize]) -> Result<usize>;
}

impl<F> HistoryPolicy for F
where
    F: Fn(usize, &[usize], &[usize]) -> usize + Sync,
{
    fn control(&self, t: usize, ys: &[usize], us: &[usize]) -> Result<usize> {
        Ok(self(t, ys, us))
    }
}

/// Ordered list of all sequences of length `len` over `0..radix`.
pub fn sequences(radix: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::with_capacity(len)];
    for _ in 0..len {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                (0..radix).map(move |d| {
                    let mut next = prefix.clone();
                    next.push(d);
                    next
                })
            })
            .collect();
    }
    out
}

fn encode(digits: &[usize], radix: usize) -> usize {
    digits.iter().fold(0, |acc, d| acc * radix + d)
}

/// Number of deterministic history-dependent strategies,
/// `Π_t |U|^(|Y|^(t+1) |U|^t)`.
pub fn strategy_count(s: &FiniteScenario) -> Result<u128> {
    let (ny, nu) = (s.n_observations(), s.n_controls());
    let mut total: u128 = 1;
    for t in 0..s.horizon() {
        let cells = checked_pow(ny, t + 1)
            .and_then(|a| checked_pow(nu, t).and_then(|b| a.checked_mul(b)))
            .filter(|c| *c <= u32::MAX as u128);
        let count = cells
            .and_then(|c| (nu as u128).checked_pow(c as u32))
            .and_then(|c| total.checked_mul(c));
        match count {
            Some(c) if c <= ENUMERATION_LIMIT => total = c,
            _ => {
                return Err(Error::TooLarge {
                    count: count.unwrap_or(u128::MAX),
                    limit: ENUMERATION_LIMIT,
                })
            }
        }
    }
    Ok(total)
}

/// A deterministic strategy stored as one lookup table per step, indexed by
/// the full `(y-history, u-history)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularStrategy {
    n_observations: usize,
    n_controls: usize,
    tables: Vec<Vec<usize>>,
}

impl TabularStrategy {
    fn cells(ny: usize, nu: usize, t: usize) -> usize {
        ny.pow(t as u32 + 1) * nu.pow(t as u32)
    }

    /// Tabulates any history policy.
    pub fn from_policy(s: &FiniteScenario, policy: &dyn HistoryPolicy) -> Result<Self> {
        strategy_count(s)?;
        let (ny, nu) = (s.n_observations(), s.n_controls());
        let mut tables = Vec::with_capacity(s.horizon());
        for t in 0..s.horizon() {
            let mut table = Vec::with_capacity(Self::cells(ny, nu, t));
            for ys in sequences(ny, t + 1) {
                for us in sequences(nu, t) {
                    let u = policy.control(t, &ys, &us)?;
                    s.check_control(t, u)?;
                    table.push(u);
                }
            }
            tables.push(table);
        }
        Ok(Self {
            n_observations: ny,
            n_controls: nu,
            tables,
        })
    }

    /// The strategy with mixed-radix number `index`; table entries are the
    /// digits, step 0 least significant.
    pub fn from_index(s: &FiniteScenario, mut index: u128) -> Result<Self> {
        let count = strategy_count(s)?;
        if index >= count {
            return Err(Error::Domain(format!(
                "strategy index {index} outside 0..{count}"
            )));
        }
        let (ny, nu) = (s.n_observations(), s.n_controls());
        let mut tables = Vec::with_capacity(s.horizon());
        for t in 0..s.horizon() {
            let mut table = Vec::with_capacity(Self::cells(ny, nu, t));
            for _ in 0..Self::cells(ny, nu, t) {
                table.push((index % nu as u128) as usize);
                index /= nu as u128;
            }
            tables.push(table);
        }
        Ok(Self {
            n_observations: ny,
            n_controls: nu,
            tables,
        })
    }

    pub fn index(&self) -> u128 {
        let mut index: u128 = 0;
        for table in self.tables.iter().rev() {
            for &u in table.iter().rev() {
                index = index * self.n_controls as u128 + u as u128;
            }
        }
        index
    }

    pub fn horizon(&self) -> usize {
        self.tables.len()
    }
}

impl HistoryPolicy for TabularStrategy {
    fn control(&self, t: usize, ys: &[usize], us: &[usize]) -> Result<usize> {
        if t >= self.tables.len() || ys.len() != t + 1 || us.len() != t {
            return Err(Error::HistoryMismatch(format!(
                "tabular strategy queried at t={t} with {} observations and {} controls",
                ys.len(),
                us.len()
            )));
        }
        let row = encode(ys, self.n_observations) * self.n_controls.pow(t as u32)
            + encode(us, self.n_controls);
        Ok(self.tables[t][row])
    }
}

/// Both systems simulated along one outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    pub xs: Vec<usize>,
    pub x_hats: Vec<usize>,
    pub ys: Vec<usize>,
    pub y_hats: Vec<usize>,
    pub us: Vec<usize>,
    /// `Σ c_t(x_t, u_t) + c_T(x_T)`.
    pub model_cost: f64,
    /// `Σ c_t(x̂_t, u_t) + c_T(x̂_T)`.
    pub actual_cost: f64,
    /// `Σ β |x_{t+1} − x̂_{t+1}|²`.
    pub penalty: f64,
}

impl Path {
    pub fn penalized_cost(&self) -> f64 {
        self.model_cost + self.penalty
    }
}

pub fn simulate(s: &FiniteScenario, o: &Outcome, policy: &dyn HistoryPolicy) -> Result<Path> {
    let horizon = s.horizon();
    let mut path = Path {
        xs: vec![o.x0],
        x_hats: vec![o.x0],
        ys: vec![s.observation_of(o.x0, o.z[0])],
        y_hats: vec![s.observation_of(o.x0, o.z[0])],
        us: Vec::with_capacity(horizon),
        model_cost: 0.0,
        actual_cost: 0.0,
        penalty: 0.0,
    };
    for t in 0..horizon {
        let u = policy.control(t, &path.ys, &path.us)?;
        s.check_control(t, u)?;
        let (x, xh) = (path.xs[t], path.x_hats[t]);
        let x_next = s.step_model(t, x, u, o.w[t])?;
        let xh_next = s.step_actual(t, xh, u, o.w[t])?;
        path.model_cost += s.stage_cost_of(x, u);
        path.actual_cost += s.stage_cost_of(xh, u);
        path.penalty += s.beta() * s.discrepancy(x_next, xh_next);
        path.us.push(u);
        path.xs.push(x_next);
        path.x_hats.push(xh_next);
        path.ys.push(s.observation_of(x_next, o.z[t + 1]));
        path.y_hats.push(s.observation_of(xh_next, o.z[t + 1]));
    }
    path.model_cost += s.terminal_cost_of(path.xs[horizon]);
    path.actual_cost += s.terminal_cost_of(path.x_hats[horizon]);
    Ok(path)
}

/// Exact expectations of a strategy's costs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactCosts {
    /// Penalized model cost `J`.
    pub penalized: f64,
    /// Actual-system cost `Ĵ`.
    pub actual: f64,
    /// Model cost without the penalty.
    pub model: f64,
    /// Expected penalty.
    pub penalty: f64,
}

pub fn exact_costs_over(
    s: &FiniteScenario,
    outcomes: &[Outcome],
    policy: &dyn HistoryPolicy,
) -> Result<ExactCosts> {
    let mut costs = ExactCosts {
        penalized: 0.0,
        actual: 0.0,
        model: 0.0,
        penalty: 0.0,
    };
    for o in outcomes {
        let path = simulate(s, o, policy)?;
        costs.penalized += o.prob * path.penalized_cost();
        costs.actual += o.prob * path.actual_cost;
        costs.model += o.prob * path.model_cost;
        costs.penalty += o.prob * path.penalty;
    }
    Ok(costs)
}

pub fn exact_costs(s: &FiniteScenario, policy: &dyn HistoryPolicy) -> Result<ExactCosts> {
    exact_costs_over(s, &enumerate_outcomes(s)?, policy)
}

/// History probability and conditional, keyed by `(y-history, u-history)`.
pub type HistoryConditionals = BTreeMap<(Vec<usize>, Vec<usize>), (f64, InformationState)>;

/// `p(x_t, x̂_t | y_{0:t}, u_{0:t-1})` for every history a policy reaches,
/// keyed by `(y-history, u-history)`, with the probability of the history.
pub fn history_conditionals(
    s: &FiniteScenario,
    policy: &dyn HistoryPolicy,
) -> Result<HistoryConditionals> {
    let n = s.n_states();
    let mut weights: BTreeMap<(Vec<usize>, Vec<usize>), Vec<f64>> = BTreeMap::new();
    for o in enumerate_outcomes(s)? {
        let path = simulate(s, &o, policy)?;
        for t in 0..=s.horizon() {
            let key = (path.ys[..=t].to_vec(), path.us[..t].to_vec());
            let joint = weights.entry(key).or_insert_with(|| vec![0.0; n * n]);
            joint[path.xs[t] * n + path.x_hats[t]] += o.prob;
        }
    }
    weights
        .into_iter()
        .map(|(key, joint)| {
            let total: f64 = joint.iter().sum();
            let t = key.1.len();
            Ok((key, (total, InformationState::from_weights(t, n, joint)?)))
        })
        .collect()
}

/// Result of comparing the history conditionals of two strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyIndependenceReport {
    pub max_discrepancy: f64,
    /// Histories reached with positive probability by both strategies.
    pub compared: usize,
    pub vacuous: bool,
}

pub fn verify_policy_independence(
    s: &FiniteScenario,
    a: &dyn HistoryPolicy,
    b: &dyn HistoryPolicy,
) -> Result<PolicyIndependenceReport> {
    let under_a = history_conditionals(s, a)?;
    let under_b = history_conditionals(s, b)?;
    let mut max_discrepancy: f64 = 0.0;
    let mut compared = 0;
    for (key, (pa, joint_a)) in &under_a {
        if let Some((pb, joint_b)) = under_b.get(key) {
            if *pa > 0.0 && *pb > 0.0 {
                compared += 1;
                max_discrepancy = max_discrepancy.max(joint_a.max_abs_difference(joint_b));
            }
        }
    }
    Ok(PolicyIndependenceReport {
        max_discrepancy,
        compared,
        vacuous: compared == 0,
    })
}

/// Direct conditional `p(x_t, x̂_t | y_{0:t}, u_{0:t-1})` with the controls
/// applied open loop.
pub fn direct_conditional(
    s: &FiniteScenario,
    ys: &[usize],
    us: &[usize],
) -> Result<InformationState> {
    let (t, n) = (us.len(), s.n_states());
    if ys.len() != t + 1 || t > s.horizon() {
        return Err(Error::HistoryMismatch(format!(
            "{} observations with {} controls",
            ys.len(),
            us.len()
        )));
    }
    let mut joint = vec![0.0; n * n];
    let policy = |k: usize, _: &[usize], _: &[usize]| us[k];
    for o in enumerate_outcomes(s)? {
        let path = simulate_prefix(s, &o, &policy, t)?;
        if path.ys == ys {
            joint[path.xs[t] * n + path.x_hats[t]] += o.prob;
        }
    }
    if !(joint.iter().sum::<f64>() > 0.0) {
        return Err(Error::ImpossibleObservation {
            t,
            observation: format!("history {ys:?}"),
        });
    }
    InformationState::from_weights(t, n, joint)
}

/// Probability of an observation history under open-loop controls.
pub fn history_probability(s: &FiniteScenario, ys: &[usize], us: &[usize]) -> Result<f64> {
    let t = us.len();
    let policy = |k: usize, _: &[usize], _: &[usize]| us[k];
    let mut total = 0.0;
    for o in enumerate_outcomes(s)? {
        if simulate_prefix(s, &o, &policy, t)?.ys == ys {
            total += o.prob;
        }
    }
    Ok(total)
}

fn simulate_prefix(
    s: &FiniteScenario,
    o: &Outcome,
    policy: &dyn HistoryPolicy,
    steps: usize,
) -> Result<Path> {
    let mut xs = vec![o.x0];
    let mut x_hats = vec![o.x0];
    let mut ys = vec![s.observation_of(o.x0, o.z[0])];
    let mut y_hats = vec![s.observation_of(o.x0, o.z[0])];
    let mut us = Vec::new();
    for t in 0..steps {
        let u = policy.control(t, &ys, &us)?;
        let x = s.step_model(t, xs[t], u, o.w[t])?;
        let xh = s.step_actual(t, x_hats[t], u, o.w[t])?;
        us.push(u);
        xs.push(x);
        x_hats.push(xh);
        ys.push(s.observation_of(x, o.z[t + 1]));
        y_hats.push(s.observation_of(xh, o.z[t + 1]));
    }
    Ok(Path {
        xs,
        x_hats,
        ys,
        y_hats,
        us,
        model_cost: 0.0,
        actual_cost: 0.0,
        penalty: 0.0,
    })
}

/// `p(ŷ_{0:t} | u_{0:t-1})` with the controls applied open loop, over every
/// actual-observation history of length `t + 1` in lexicographic order.
pub fn actual_observation_law(s: &FiniteScenario, us: &[usize]) -> Result<Distribution<Vec<usize>>> {
    let t = us.len();
    let support = sequences(s.n_observations(), t + 1);
    let mut mass = vec![0.0; support.len()];
    let policy = |k: usize, _: &[usize], _: &[usize]| us[k];
    for o in enumerate_outcomes(s)? {
        let path = simulate_prefix(s, &o, &policy, t)?;
        mass[encode(&path.y_hats, s.n_observations())] += o.prob;
    }
    Distribution::from_weights(support, mass)
}

/// `p(ŷ_{0:t} | u_{0:t-1})` under a closed-loop strategy, one law per
/// control history reached with positive probability at step `t`.
pub fn actual_observation_law_under(
    s: &FiniteScenario,
    policy: &dyn HistoryPolicy,
    t: usize,
) -> Result<BTreeMap<Vec<usize>, Distribution<Vec<usize>>>> {
    if t > s.horizon() {
        return Err(Error::Domain(format!("t={t} beyond the horizon")));
    }
    let support = sequences(s.n_observations(), t + 1);
    let mut weights: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    for o in enumerate_outcomes(s)? {
        let path = simulate_prefix(s, &o, policy, t)?;
        weights
            .entry(path.us.clone())
            .or_insert_with(|| vec![0.0; support.len()])[encode(&path.y_hats, s.n_observations())] +=
            o.prob;
    }
    weights
        .into_iter()
        .map(|(us, mass)| Ok((us, Distribution::from_weights(support.clone(), mass)?)))
        .collect()
}

/// The three factors built from exact quantities: the model filter along
/// `(ys, us)`, the actual filter with the exact kernel along every
/// actual-observation history of positive probability, and the open-loop
/// history weights.
pub fn exact_belief_factor(
    s: &FiniteScenario,
    ys: &[usize],
    us: &[usize],
) -> Result<BeliefFactor> {
    let view = s.model_view();
    let kernel = ActualKernel::exact(s);
    let model_belief = filter::model_belief_along(&view, ys, us)?;
    let obs_history_weight = actual_observation_law(s, us)?;
    let mut actual_belief_by_history = BTreeMap::new();
    for (history, p) in obs_history_weight.iter() {
        if p > 0.0 {
            actual_belief_by_history.insert(
                history.clone(),
                filter::actual_belief_along(&view, &kernel, history, us)?,
            );
        }
    }
    Ok(BeliefFactor {
        model_belief,
        actual_belief_by_history,
        obs_history_weight,
    })
}

/// Every `(y-history, u-history)` pair of length `t` with positive
/// open-loop probability.
pub fn reachable_histories(s: &FiniteScenario, t: usize) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    let mut out = Vec::new();
    for us in sequences(s.n_controls(), t) {
        let policy = |k: usize, _: &[usize], _: &[usize]| us[k];
        let mut seen = BTreeMap::new();
        for o in enumerate_outcomes(s)? {
            let path = simulate_prefix(s, &o, &policy, t)?;
            *seen.entry(path.ys).or_insert(0.0) += o.prob;
        }
        for (ys, p) in seen {
            if p > 0.0 {
                out.push((ys, us.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::builtin_discrete_toy;
    use crate::scenarios::toy::*;

    #[test]
    fn outcome_probabilities_sum_to_one() {
        let s = builtin_discrete_toy();
        let outcomes = enumerate_outcomes(&s).unwrap();
        // x0 is a point mass: 1 · 2² · 2³
        assert_eq!(outcomes.len(), 32);
        let total: f64 = outcomes.iter().map(|o| o.prob).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn toy_strategy_count() {
        assert_eq!(strategy_count(&builtin_discrete_toy()).unwrap(), 1024);
    }

    #[test]
    fn strategy_index_round_trip() {
        let s = builtin_discrete_toy();
        for index in [0u128, 1, 77, 512, 1023] {
            assert_eq!(TabularStrategy::from_index(&s, index).unwrap().index(), index);
        }
        assert!(TabularStrategy::from_index(&s, 1024).is_err());
    }

    #[test]
    fn tabulated_policy_agrees_with_source() {
        let s = builtin_discrete_toy();
        let reactive = |t: usize, ys: &[usize], _: &[usize]| usize::from(ys[t] == 1);
        let table = TabularStrategy::from_policy(&s, &reactive).unwrap();
        for ys in sequences(2, 2) {
            for us in sequences(2, 1) {
                assert_eq!(table.control(1, &ys, &us).unwrap(), reactive(1, &ys, &us));
            }
        }
    }

    #[test]
    fn always_repair_costs() {
        let s = builtin_discrete_toy();
        let repair = |_: usize, _: &[usize], _: &[usize]| REPAIR;
        let costs = exact_costs(&s, &repair).unwrap();
        assert!((costs.actual - 0.2).abs() < 1e-15);
        assert_eq!(costs.penalty, 0.0);
    }

    #[test]
    fn one_step_idle_by_hand() {
        // idle twice: mismatch only matters from a broken state at t=1
        let s = builtin_discrete_toy();
        let idle = |_: usize, _: &[usize], _: &[usize]| IDLE;
        let costs = exact_costs(&s, &idle).unwrap();
        // model: broken at T with prob 0.8·0.2 + 0.2·0.8 = 0.32
        assert!((costs.model - 0.32).abs() < 1e-15);
        // penalty: broken at t=1 (0.2) then shock (0.2)
        assert!((costs.penalty - 0.04).abs() < 1e-15);
        // actual: broken at T with prob 0.16 + 0.2·1.0
        assert!((costs.actual - 0.36).abs() < 1e-15);
    }

    #[test]
    fn same_policy_is_trivially_independent() {
        let s = builtin_discrete_toy();
        let idle = |_: usize, _: &[usize], _: &[usize]| IDLE;
        let report = verify_policy_independence(&s, &idle, &idle).unwrap();
        assert_eq!(report.max_discrepancy, 0.0);
        assert!(!report.vacuous);
    }

    #[test]
    fn disjoint_policies_are_vacuous_after_t0() {
        let s = builtin_discrete_toy();
        let idle = |_: usize, _: &[usize], _: &[usize]| IDLE;
        let repair = |_: usize, _: &[usize], _: &[usize]| REPAIR;
        let report = verify_policy_independence(&s, &idle, &repair).unwrap();
        // only the t=0 histories (no controls yet) are shared
        assert_eq!(report.compared, 2);
        assert_eq!(report.max_discrepancy, 0.0);
    }

    #[test]
    fn observation_law_is_normalized_over_full_support() {
        let s = builtin_discrete_toy();
        let law = actual_observation_law(&s, &[IDLE, REPAIR]).unwrap();
        assert_eq!(law.len(), 8);
        assert!((law.mass().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}
