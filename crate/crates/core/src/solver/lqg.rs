//! Closed-form path for scalar linear-Gaussian scenarios.
//!
//! Every random quantity in a rollout under a linear strategy is an affine
//! function of the primitives `ξ = (X₀, W₀..W_{T-1}, Z₀..Z_T)`, so costs and
//! conditional expectations reduce to exact Gaussian moment algebra.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::problem::{LinearGaussianScenario, LinearStep, Plant};

/// Control that sends the model's next state to `target`:
/// `u = (target − a·x − g·w) / b`.
pub fn matching_control(
    s: &LinearGaussianScenario,
    t: usize,
    x: f64,
    w: f64,
    target: f64,
) -> Result<f64> {
    if t >= s.horizon() {
        return Err(Error::Domain(format!("no control at t={t}")));
    }
    let m = s.model_step(t);
    if m.control == 0.0 {
        return Err(Error::NonInvertible(t));
    }
    Ok((target - m.state * x - m.disturbance * w) / m.control)
}

/// Control under which model and actual land on the same next state when
/// both are driven by it: the fixed point of `u = matching(target(u))`,
/// `u = (â·x̂ + ĝ·w − a·x − g·w) / (b − b̂)`.
pub fn self_consistent_matching(
    t: usize,
    model: LinearStep,
    actual: LinearStep,
    x: f64,
    x_hat: f64,
    w: f64,
) -> Result<f64> {
    let gain = model.control - actual.control;
    if gain == 0.0 {
        return Err(Error::NonInvertible(t));
    }
    Ok((actual.state * x_hat + actual.disturbance * w - model.state * x - model.disturbance * w)
        / gain)
}

/// Closed-form separated strategy: at every step, the matching control
/// against the realized actual transition.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingStrategy {
    model: Vec<LinearStep>,
    actual: Vec<LinearStep>,
    scenario_hash: String,
}

impl MatchingStrategy {
    /// Built from the scenario's own actual coefficients; verification only.
    pub fn exact(s: &LinearGaussianScenario) -> Self {
        Self::with_actual(s, (0..s.horizon()).map(|t| s.actual_step(t)).collect())
    }

    /// Built from externally supplied (for instance, identified) actual
    /// coefficients.
    pub fn with_actual(s: &LinearGaussianScenario, actual: Vec<LinearStep>) -> Self {
        Self {
            model: (0..s.horizon()).map(|t| s.model_step(t)).collect(),
            actual,
            scenario_hash: s.scenario_hash(),
        }
    }

    pub fn scenario_hash(&self) -> &str {
        &self.scenario_hash
    }

    pub fn control(&self, t: usize, x: f64, x_hat: f64, w: f64) -> Result<f64> {
        let (model, actual) = match (self.model.get(t), self.actual.get(t)) {
            (Some(m), Some(a)) => (*m, *a),
            _ => return Err(Error::Domain(format!("no control at t={t}"))),
        };
        self_consistent_matching(t, model, actual, x, x_hat, w)
    }
}

/// `u_t = offset_t + Σ_{s≤t} gain_{t,s}·ŷ_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearStrategy {
    pub offsets: Vec<f64>,
    /// `gains[t]` has `t + 1` entries, one per observation `ŷ_0..ŷ_t`.
    pub gains: Vec<Vec<f64>>,
}

impl LinearStrategy {
    pub fn zero(horizon: usize) -> Self {
        Self {
            offsets: vec![0.0; horizon],
            gains: (0..horizon).map(|t| vec![0.0; t + 1]).collect(),
        }
    }

    /// The two-step family `u₀ = a·ŷ₀`, `u₁ = b·ŷ₁ + c·ŷ₀`.
    pub fn two_step(a: f64, b: f64, c: f64) -> Self {
        Self {
            offsets: vec![0.0, 0.0],
            gains: vec![vec![a], vec![c, b]],
        }
    }

    pub fn horizon(&self) -> usize {
        self.gains.len()
    }

    pub fn control(&self, t: usize, y_hats: &[f64]) -> Result<f64> {
        let gains = self
            .gains
            .get(t)
            .ok_or_else(|| Error::Domain(format!("no control at t={t}")))?;
        if y_hats.len() < gains.len() {
            return Err(Error::HistoryMismatch(format!(
                "control at t={t} needs {} observations, got {}",
                gains.len(),
                y_hats.len()
            )));
        }
        Ok(self.offsets[t] + gains.iter().zip(y_hats).map(|(g, y)| g * y).sum::<f64>())
    }

    /// `(a, b, c)` of the two-step family.
    pub fn two_step_coefficients(&self) -> Option<(f64, f64, f64)> {
        match self.gains.as_slice() {
            [g0, g1] if g0.len() == 1 && g1.len() == 2 => Some((g0[0], g1[1], g1[0])),
            _ => None,
        }
    }
}

/// An affine function `coef · ξ + constant` of the primitives.
#[derive(Debug, Clone, PartialEq)]
struct Affine {
    coef: DVector<f64>,
    constant: f64,
}

impl Affine {
    fn constant(dim: usize, c: f64) -> Self {
        Self {
            coef: DVector::zeros(dim),
            constant: c,
        }
    }

    fn primitive(dim: usize, i: usize) -> Self {
        let mut coef = DVector::zeros(dim);
        coef[i] = 1.0;
        Self {
            coef,
            constant: 0.0,
        }
    }

    fn scale(&self, k: f64) -> Self {
        Self {
            coef: &self.coef * k,
            constant: self.constant * k,
        }
    }

    fn add(&self, other: &Self) -> Self {
        Self {
            coef: &self.coef + &other.coef,
            constant: self.constant + other.constant,
        }
    }

    fn combine(terms: &[(f64, &Affine)], dim: usize) -> Self {
        terms
            .iter()
            .fold(Self::constant(dim, 0.0), |acc, (k, a)| acc.add(&a.scale(*k)))
    }
}

/// Mean and covariance of the primitives.
struct Moments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    horizon: usize,
}

impl Moments {
    fn of(s: &LinearGaussianScenario) -> Self {
        let horizon = s.horizon();
        let dim = 1 + horizon + horizon + 1;
        let mut mean = DVector::zeros(dim);
        let mut cov = DMatrix::zeros(dim, dim);
        mean[0] = s.initial().mean();
        cov[(0, 0)] = s.initial().variance();
        for t in 0..horizon {
            mean[1 + t] = s.disturbance(t).mean();
            cov[(1 + t, 1 + t)] = s.disturbance(t).variance();
        }
        for t in 0..=horizon {
            mean[1 + horizon + t] = s.noise(t).mean();
            cov[(1 + horizon + t, 1 + horizon + t)] = s.noise(t).variance();
        }
        cov[(0, 1)] = s.initial_disturbance_covariance();
        cov[(1, 0)] = s.initial_disturbance_covariance();
        Self {
            mean,
            cov,
            horizon,
        }
    }

    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn x0(&self) -> Affine {
        Affine::primitive(self.dim(), 0)
    }

    fn w(&self, t: usize) -> Affine {
        Affine::primitive(self.dim(), 1 + t)
    }

    fn z(&self, t: usize) -> Affine {
        Affine::primitive(self.dim(), 1 + self.horizon + t)
    }

    fn mean_of(&self, a: &Affine) -> f64 {
        a.coef.dot(&self.mean) + a.constant
    }

    fn cross(&self, a: &Affine, b: &Affine) -> f64 {
        (a.coef.transpose() * &self.cov * &b.coef)[(0, 0)] + self.mean_of(a) * self.mean_of(b)
    }

    fn second(&self, a: &Affine) -> f64 {
        self.cross(a, a)
    }

    /// `E[f | I]` as an affine map of the conditioning variables: returns
    /// `(constant, weights)` with `E[f | I] = constant + weights · I`.
    fn condition(&self, f: &Affine, info: &[Affine]) -> (f64, Vec<f64>) {
        let k = info.len();
        let mut cov_ii = DMatrix::zeros(k, k);
        let mut cov_fi = DVector::zeros(k);
        for (i, a) in info.iter().enumerate() {
            cov_fi[i] = (f.coef.transpose() * &self.cov * &a.coef)[(0, 0)];
            for (j, b) in info.iter().enumerate() {
                cov_ii[(i, j)] = (a.coef.transpose() * &self.cov * &b.coef)[(0, 0)];
            }
        }
        let pinv = cov_ii
            .pseudo_inverse(1e-12)
            .expect("pseudo-inverse with a nonnegative tolerance");
        let weights = pinv * cov_fi;
        let constant =
            self.mean_of(f) - info.iter().zip(weights.iter()).map(|(a, w)| w * self.mean_of(a)).sum::<f64>();
        (constant, weights.iter().copied().collect())
    }
}

/// Exact expected costs of a linear strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCosts {
    /// `Ĵ`, the actual-system cost.
    pub actual: f64,
    /// Model cost without the penalty.
    pub model: f64,
    /// `Σ β E|X_{t+1} − X̂_{t+1}|²`.
    pub penalty: f64,
    /// `J`, model cost plus penalty.
    pub penalized: f64,
}

struct Rollout {
    x: Vec<Affine>,
    x_hat: Vec<Affine>,
    u: Vec<Affine>,
}

fn roll_out(s: &LinearGaussianScenario, m: &Moments, strategy: &LinearStrategy) -> Rollout {
    let dim = m.dim();
    let horizon = s.horizon();
    let mut x = vec![m.x0()];
    let mut x_hat = vec![m.x0()];
    let mut y_hat = Vec::new();
    let mut u = Vec::new();
    for t in 0..=horizon {
        let obs = s.observation_map(t);
        y_hat.push(Affine::combine(&[(obs.state, &x_hat[t]), (obs.noise, &m.z(t))], dim));
        if t == horizon {
            break;
        }
        let mut control = Affine::constant(dim, strategy.offsets[t]);
        for (g, y) in strategy.gains[t].iter().zip(&y_hat) {
            control = control.add(&y.scale(*g));
        }
        let w = m.w(t);
        let (a, b) = (s.model_step(t), s.actual_step(t));
        x.push(Affine::combine(
            &[(a.state, &x[t]), (a.control, &control), (a.disturbance, &w)],
            dim,
        ));
        x_hat.push(Affine::combine(
            &[(b.state, &x_hat[t]), (b.control, &control), (b.disturbance, &w)],
            dim,
        ));
        u.push(control);
    }
    Rollout { x, x_hat, u }
}

fn check_strategy(s: &LinearGaussianScenario, strategy: &LinearStrategy) -> Result<()> {
    let ok = strategy.gains.len() == s.horizon()
        && strategy.offsets.len() == s.horizon()
        && strategy.gains.iter().enumerate().all(|(t, g)| g.len() == t + 1);
    if ok {
        Ok(())
    } else {
        Err(Error::Configuration(format!(
            "linear strategy shape does not fit horizon {}",
            s.horizon()
        )))
    }
}

/// Closed-form expected costs of a linear strategy on both systems.
pub fn exact_linear_costs(s: &LinearGaussianScenario, strategy: &LinearStrategy) -> Result<LinearCosts> {
    check_strategy(s, strategy)?;
    let m = Moments::of(s);
    let r = roll_out(s, &m, strategy);
    let dim = m.dim();
    let horizon = s.horizon();
    let (mut actual, mut model, mut penalty) = (0.0, 0.0, 0.0);
    for t in 0..horizon {
        let c = s.stage_weights(t);
        let u2 = m.second(&r.u[t]);
        actual += c.state * m.second(&r.x_hat[t]) + c.control * u2;
        model += c.state * m.second(&r.x[t]) + c.control * u2;
        let gap = Affine::combine(&[(1.0, &r.x[t + 1]), (-1.0, &r.x_hat[t + 1])], dim);
        penalty += s.beta() * m.second(&gap);
    }
    actual += s.terminal_weight() * m.second(&r.x_hat[horizon]);
    model += s.terminal_weight() * m.second(&r.x[horizon]);
    Ok(LinearCosts {
        actual,
        model,
        penalty,
        penalized: model + penalty,
    })
}

/// Outcome of the forward stagewise procedure.
#[derive(Debug, Clone, PartialEq)]
pub struct StagewiseReport {
    /// Solution quoted for the two-step example: `u₀ = ½ŷ₀`, `u₁ = −¼ŷ₀`.
    /// Present only for the built-in two-step scenario.
    pub stated: Option<LinearStrategy>,
    /// Result of the procedure: at step `t`, with matching controls making
    /// the model follow the actual system and later controls held at zero,
    /// `u_t` minimizes the conditional expected remaining actual cost given
    /// `ŷ_{0:t}`.
    pub procedure: LinearStrategy,
    /// True when the unconditional first-order condition at every step holds
    /// for any linear gain (all relevant means are zero), so it cannot pick
    /// a strategy by itself.
    pub unconditional_degenerate: bool,
}

/// Forward stagewise minimization.
///
/// After the matching controls zero the discrepancy, the penalized objective
/// equals the actual cost. At step `t` the remaining actual states are
/// affine in `u_t`, `x̂_s = α_s + β_s·u_t` (later controls zero), and the
/// minimizer of `E[Σ q_s x̂_s² + r_t u_t² | ŷ_{0:t}]` is
/// `u_t = −E[Σ q_s β_s α_s | ŷ_{0:t}] / (r_t + Σ q_s β_s²)`.
pub fn lqg_stagewise_solve(s: &LinearGaussianScenario) -> Result<StagewiseReport> {
    let m = Moments::of(s);
    let dim = m.dim();
    let horizon = s.horizon();
    let mut strategy = LinearStrategy::zero(horizon);
    let mut unconditional_degenerate = true;
    for t in 0..horizon {
        let r = roll_out(s, &m, &strategy);
        let info: Vec<Affine> = (0..=t)
            .map(|k| {
                let obs = s.observation_map(k);
                Affine::combine(&[(obs.state, &r.x_hat[k]), (obs.noise, &m.z(k))], dim)
            })
            .collect();
        // α_s: the state with u_t = 0; β_s: its sensitivity to u_t
        let mut alpha = r.x_hat[t + 1].add(&r.u[t].scale(-s.actual_step(t).control));
        let mut beta = s.actual_step(t).control;
        let mut numerator = Affine::constant(dim, 0.0);
        let mut denominator = s.stage_weights(t).control;
        for k in t + 1..=horizon {
            let q = if k == horizon {
                s.terminal_weight()
            } else {
                s.stage_weights(k).state
            };
            numerator = numerator.add(&alpha.scale(q * beta));
            denominator += q * beta * beta;
            if k < horizon {
                let step = s.actual_step(k);
                alpha = Affine::combine(&[(step.state, &alpha), (step.disturbance, &m.w(k))], dim);
                beta *= step.state;
            }
        }
        if !(denominator > 0.0) {
            return Err(Error::Domain(format!(
                "stage objective at t={t} is not strictly convex in the control"
            )));
        }
        let (constant, weights) = m.condition(&numerator, &info);
        strategy.offsets[t] = -constant / denominator;
        strategy.gains[t] = weights.iter().map(|w| -w / denominator).collect();
        if m.mean_of(&numerator).abs() > 1e-12 || info.iter().any(|a| m.mean_of(a).abs() > 1e-12) {
            unconditional_degenerate = false;
        }
    }
    let stated = (s.parts().model == crate::scenarios::builtin_lqg().parts().model
        && s.parts().actual == crate::scenarios::builtin_lqg().parts().actual)
        .then(|| LinearStrategy::two_step(0.5, 0.0, -0.25));
    Ok(StagewiseReport {
        stated,
        procedure: strategy,
        unconditional_degenerate,
    })
}

/// Best member of the two-step family found by grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracle {
    pub strategy: LinearStrategy,
    pub actual_cost: f64,
    pub evaluated: u64,
}

/// Coarse grid spacing and half-width of the search box.
pub const ORACLE_STEP: f64 = 0.01;
pub const ORACLE_BOUND: f64 = 3.0;
/// Spacing of the refinement pass.
pub const ORACLE_REFINED_STEP: f64 = 1e-4;

/// Exact `Ĵ` of `u₀ = a·ŷ₀`, `u₁ = b·ŷ₁ + c·ŷ₀` as a quadratic in `(b, c)`
/// for a fixed `a`: coefficients of `1, b, c, b², c², bc`.
fn two_step_quadratic(s: &LinearGaussianScenario, m: &Moments, a: f64) -> [f64; 6] {
    let r = roll_out(s, m, &LinearStrategy::two_step(a, 0.0, 0.0));
    let dim = m.dim();
    let y = |k: usize| {
        let obs = s.observation_map(k);
        Affine::combine(&[(obs.state, &r.x_hat[k]), (obs.noise, &m.z(k))], dim)
    };
    let v = [r.x_hat[1].clone(), y(0), y(1), m.w(1)];
    let mm = |i: usize, j: usize| m.cross(&v[i], &v[j]);
    let step = s.actual_step(1);
    let (a1, b1, g1) = (step.state, step.control, step.disturbance);
    let (c0, c1) = (s.stage_weights(0), s.stage_weights(1));
    let qt = s.terminal_weight();
    let sq = c1.control + qt * b1 * b1;
    let constant = c0.state * m.second(&m.x0())
        + c0.control * a * a * mm(1, 1)
        + c1.state * mm(0, 0)
        + qt * (a1 * a1 * mm(0, 0) + g1 * g1 * mm(3, 3) + 2.0 * a1 * g1 * mm(0, 3));
    [
        constant,
        qt * 2.0 * b1 * (a1 * mm(0, 2) + g1 * mm(3, 2)),
        qt * 2.0 * b1 * (a1 * mm(0, 1) + g1 * mm(3, 1)),
        sq * mm(2, 2),
        sq * mm(1, 1),
        2.0 * sq * mm(1, 2),
    ]
}

fn eval_quadratic(k: &[f64; 6], b: f64, c: f64) -> f64 {
    k[0] + k[1] * b + k[2] * c + k[3] * b * b + k[4] * c * c + k[5] * b * c
}

fn axis(center: f64, half: f64, step: f64) -> Vec<f64> {
    let n = (2.0 * half / step).round() as i64;
    (0..=n).map(|i| center - half + i as f64 * step).collect()
}

fn search(s: &LinearGaussianScenario, m: &Moments, a_axis: &[f64], b_axis: &[f64], c_axis: &[f64]) -> (f64, f64, f64, f64) {
    a_axis
        .par_iter()
        .map(|&a| {
            let k = two_step_quadratic(s, m, a);
            let mut best = (f64::INFINITY, a, 0.0, 0.0);
            for &b in b_axis {
                for &c in c_axis {
                    let j = eval_quadratic(&k, b, c);
                    if j < best.0 {
                        best = (j, a, b, c);
                    }
                }
            }
            best
        })
        .reduce(
            || (f64::INFINITY, 0.0, 0.0, 0.0),
            |x, y| if y.0 < x.0 || (y.0 == x.0 && (y.1, y.2, y.3) < (x.1, x.2, x.3)) { y } else { x },
        )
}

/// Grid search over `a, b, c ∈ [−3, 3]` in steps of 0.01, then a pass with
/// spacing 1e-4 over the box of half-width 0.01 around the best point,
/// minimizing the exact actual cost `Ĵ`.
pub fn lqg_grid_oracle(s: &LinearGaussianScenario) -> Result<GridOracle> {
    if s.horizon() != 2 {
        return Err(Error::UnsupportedRepresentation(
            "the linear grid oracle covers two-step scenarios only".into(),
        ));
    }
    let m = Moments::of(s);
    let coarse = axis(0.0, ORACLE_BOUND, ORACLE_STEP);
    let (_, a, b, c) = search(s, &m, &coarse, &coarse, &coarse);
    let fine = |center: f64| axis(center, ORACLE_STEP, ORACLE_REFINED_STEP);
    let (_, a, b, c) = search(s, &m, &fine(a), &fine(b), &fine(c));
    let strategy = LinearStrategy::two_step(a, b, c);
    let actual_cost = exact_linear_costs(s, &strategy)?.actual;
    let evaluated = (coarse.len() as u64).pow(3) + (fine(0.0).len() as u64).pow(3);
    Ok(GridOracle {
        strategy,
        actual_cost,
        evaluated,
    })
}

/// Everything the two-step comparison reports.
#[derive(Debug, Clone, PartialEq)]
pub struct LqgReport {
    pub stagewise: StagewiseReport,
    pub procedure_costs: LinearCosts,
    pub stated_costs: Option<LinearCosts>,
    pub oracle: GridOracle,
}

pub fn lqg_report(s: &LinearGaussianScenario) -> Result<LqgReport> {
    let stagewise = lqg_stagewise_solve(s)?;
    let procedure_costs = exact_linear_costs(s, &stagewise.procedure)?;
    let stated_costs = stagewise
        .stated
        .as_ref()
        .map(|st| exact_linear_costs(s, st))
        .transpose()?;
    let oracle = lqg_grid_oracle(s)?;
    Ok(LqgReport {
        stagewise,
        procedure_costs,
        stated_costs,
        oracle,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::Gaussian1D;
    use crate::problem::LinearParts;
    use crate::scenarios::builtin_lqg;

    #[test]
    fn matching_example() {
        let s = builtin_lqg();
        let u0 = self_consistent_matching(0, s.model_step(0), s.actual_step(0), 1.0, 1.0, 0.2)
            .unwrap();
        assert!((u0 + 0.8).abs() < 1e-15);
        let x1 = s.step_model(0, 1.0, u0, 0.2).unwrap();
        let xh1 = s.step_actual(0, 1.0, u0, 0.2).unwrap();
        assert!((x1 - 0.4).abs() < 1e-15 && (xh1 - 0.4).abs() < 1e-15);
        // the explicit target form agrees
        let u = matching_control(&s, 0, 1.0, 0.2, xh1).unwrap();
        assert!((u - u0).abs() < 1e-15);
    }

    #[test]
    fn matching_uncontrolled_target_is_zero() {
        let s = builtin_lqg();
        let target = s.step_model(1, 0.7, 0.0, 0.0).unwrap();
        assert_eq!(matching_control(&s, 1, 0.7, 0.0, target).unwrap(), 0.0);
    }

    #[test]
    fn matching_second_step_closes_gap() {
        let s = builtin_lqg();
        for (x1, xh2) in [(0.4, -1.3), (2.0, 0.25), (-0.5, 0.0)] {
            let u1 = matching_control(&s, 1, x1, 0.0, xh2).unwrap();
            assert_eq!(s.step_model(1, x1, u1, 0.0).unwrap(), xh2);
        }
    }

    #[test]
    fn zero_control_coefficient_is_rejected() {
        let mut parts = builtin_lqg().parts();
        parts.model[0].control = 0.0;
        let s = LinearGaussianScenario::new(parts).unwrap();
        assert_eq!(matching_control(&s, 0, 1.0, 0.0, 1.0), Err(Error::NonInvertible(0)));
    }

    #[test]
    fn stated_and_procedure_costs() {
        let s = builtin_lqg();
        let stated = exact_linear_costs(&s, &LinearStrategy::two_step(0.5, 0.0, -0.25)).unwrap();
        assert!((stated.actual - 1.9375).abs() < 1e-12);
        let report = lqg_stagewise_solve(&s).unwrap();
        let (a, b, c) = report.procedure.two_step_coefficients().unwrap();
        assert!((a + 1.5).abs() < 1e-12, "a={a}");
        assert!((b + 0.5).abs() < 1e-12, "b={b}");
        assert!(c.abs() < 1e-12, "c={c}");
        assert!(report.unconditional_degenerate);
        assert_eq!(report.stated, Some(LinearStrategy::two_step(0.5, 0.0, -0.25)));
        let procedure = exact_linear_costs(&s, &report.procedure).unwrap();
        assert!((procedure.actual - 0.1875).abs() < 1e-12);
    }

    #[test]
    fn deterministic_zero_primitives_give_zero_controls() {
        let parts = builtin_lqg().parts();
        let s = LinearGaussianScenario::new(LinearParts {
            initial: Gaussian1D::point(0.0),
            disturbance: vec![Gaussian1D::point(0.0); 2],
            initial_disturbance_covariance: 0.0,
            ..parts
        })
        .unwrap();
        let report = lqg_stagewise_solve(&s).unwrap();
        assert_eq!(report.procedure, LinearStrategy::zero(2));
    }

    #[test]
    fn quadratic_matches_moment_algebra() {
        let s = builtin_lqg();
        let m = Moments::of(&s);
        for (a, b, c) in [(-1.5, -0.5, 0.0), (0.5, 0.0, -0.25), (1.0, 2.0, -1.0)] {
            let k = two_step_quadratic(&s, &m, a);
            let direct = exact_linear_costs(&s, &LinearStrategy::two_step(a, b, c)).unwrap();
            assert!((eval_quadratic(&k, b, c) - direct.actual).abs() < 1e-12);
        }
    }

    #[test]
    fn grid_oracle_finds_procedure_optimum() {
        let oracle = lqg_grid_oracle(&builtin_lqg()).unwrap();
        let (a, b, c) = oracle.strategy.two_step_coefficients().unwrap();
        assert!((a + 1.5).abs() < 1e-3 && (b + 0.5).abs() < 1e-3 && c.abs() < 1e-3);
        assert!((oracle.actual_cost - 0.1875).abs() < 1e-6);
    }
}
