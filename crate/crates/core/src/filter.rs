//! Information-state filtering over the joint (model state, actual state).
//!
//! Beliefs are explicit tables. The joint is stored model-state major: entry
//! `x * n + x_hat` holds `p(X_t = x, X̂_t = x_hat | y_{0:t}, u_{0:t-1})`.
//!
//! Only the model coordinate is observed by the controller, so the correction
//! step uses the observation likelihood of `x`. The actual system enters the
//! prediction step through an [`ActualKernel`], never through the scenario's
//! actual table.

use std::collections::BTreeMap;

use crate::distribution::{Distribution, MASS_TOLERANCE};
use crate::error::{Error, Result};
use crate::problem::{ActualKernel, ModelView};

/// `Π_t`, the joint conditional law of `(X_t, X̂_t)` given the model's
/// observation and control history.
#[derive(Debug, Clone, PartialEq)]
pub struct InformationState {
    t: usize,
    n: usize,
    joint: Vec<f64>,
}

impl InformationState {
    /// Validates shape and normalization.
    pub fn new(t: usize, n: usize, joint: Vec<f64>) -> Result<Self> {
        if n == 0 || joint.len() != n * n {
            return Err(Error::invariant(
                "information state shape",
                format!("{} entries for {n} states", joint.len()),
            ));
        }
        if joint.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::invariant("nonnegative mass", "negative or non-finite entry"));
        }
        let total: f64 = joint.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invariant(
                "normalization",
                format!("joint mass sums to {total}"),
            ));
        }
        Ok(Self { t, n, joint })
    }

    /// Normalizes nonnegative weights; an all-zero table is an error.
    pub fn from_weights(t: usize, n: usize, mut weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invariant("normalization", "all joint weights are zero"));
        }
        for w in &mut weights {
            *w /= total;
        }
        Self::new(t, n, weights)
    }

    pub fn point(t: usize, n: usize, x: usize, x_hat: usize) -> Self {
        let mut joint = vec![0.0; n * n];
        joint[x * n + x_hat] = 1.0;
        Self { t, n, joint }
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n_states(&self) -> usize {
        self.n
    }

    pub fn joint(&self) -> &[f64] {
        &self.joint
    }

    #[inline]
    pub fn prob(&self, x: usize, x_hat: usize) -> f64 {
        self.joint[x * self.n + x_hat]
    }

    pub fn model_marginal(&self) -> Vec<f64> {
        self.joint.chunks(self.n).map(|row| row.iter().sum()).collect()
    }

    pub fn actual_marginal(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for row in self.joint.chunks(self.n) {
            for (o, p) in out.iter_mut().zip(row) {
                *o += p;
            }
        }
        out
    }

    /// Mode of the actual marginal; ties go to the lowest state index.
    pub fn actual_mode(&self) -> usize {
        let marginal = self.actual_marginal();
        let mut best = 0;
        for (i, p) in marginal.iter().enumerate() {
            if *p > marginal[best] {
                best = i;
            }
        }
        best
    }

    pub fn l1_distance(&self, other: &Self) -> f64 {
        self.joint
            .iter()
            .zip(&other.joint)
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    pub fn max_abs_difference(&self, other: &Self) -> f64 {
        self.joint
            .iter()
            .zip(&other.joint)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Joint as a labeled distribution over `(x, x̂)` pairs in storage order.
    pub fn to_distribution(&self) -> Distribution<(usize, usize)> {
        let support = (0..self.n)
            .flat_map(|x| (0..self.n).map(move |xh| (x, xh)))
            .collect();
        Distribution::new(support, self.joint.clone()).expect("validated at construction")
    }

    pub(crate) fn with_time(mut self, t: usize) -> Self {
        self.t = t;
        self
    }
}

/// The three factors the joint is rebuilt from: the model belief, one actual
/// belief per actual-observation history, and the weight of each history
/// given the control history.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefFactor {
    pub model_belief: Distribution<usize>,
    pub actual_belief_by_history: BTreeMap<Vec<usize>, Distribution<usize>>,
    pub obs_history_weight: Distribution<Vec<usize>>,
}

impl BeliefFactor {
    pub fn compose(&self) -> Result<InformationState> {
        factorize(
            &self.model_belief,
            &self.actual_belief_by_history,
            &self.obs_history_weight,
        )
    }
}

/// `p(Y_t = y | X_t = x)`, the sensor noise summed out.
pub fn observation_likelihood(view: &ModelView<'_>, t: usize, y: usize, x: usize) -> f64 {
    view.noise_law(t)
        .iter()
        .filter(|(&z, _)| view.observation_of(x, z) == y)
        .map(|(_, p)| p)
        .sum()
}

/// `p(X_{t+1} = x', X̂_{t+1} = x̂' | X_t = x, X̂_t = x̂, U_t = u)`; both systems
/// consume the same disturbance draw.
pub fn joint_transition(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    t: usize,
    next: (usize, usize),
    current: (usize, usize),
    u: usize,
) -> f64 {
    let (x_next, xh_next) = next;
    let (x, xh) = current;
    view.disturbance_law(t)
        .iter()
        .filter(|(&w, _)| view.model_next(x, u, w) == x_next)
        .map(|(&w, p)| p * kernel.row(xh, u, w)[xh_next])
        .sum()
}

fn check_kernel(view: &ModelView<'_>, kernel: &ActualKernel) -> Result<()> {
    if kernel.matches(view) {
        Ok(())
    } else {
        Err(Error::Configuration(
            "actual kernel dimensions do not match the scenario".into(),
        ))
    }
}

fn impossible(view: &ModelView<'_>, t: usize, y: usize) -> Error {
    Error::ImpossibleObservation {
        t,
        observation: view.observation_label(y).to_string(),
    }
}

/// `Π_0` after the first observation. The actual system starts where the
/// model starts, so the prior sits on the diagonal.
pub fn initial_information_state(view: &ModelView<'_>, y0: usize) -> Result<InformationState> {
    let n = view.n_states();
    let mut joint = vec![0.0; n * n];
    for (&x, p) in view.initial().iter() {
        joint[x * n + x] = p * observation_likelihood(view, 0, y0, x);
    }
    if !(joint.iter().sum::<f64>() > 0.0) {
        return Err(impossible(view, 0, y0));
    }
    InformationState::from_weights(0, n, joint)
}

/// Unnormalized one-step prediction of the joint.
fn predict_joint(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    pi: &InformationState,
    u: usize,
) -> Vec<f64> {
    let n = pi.n;
    let mut out = vec![0.0; n * n];
    let law = view.disturbance_law(pi.t);
    for x in 0..n {
        for xh in 0..n {
            let p = pi.prob(x, xh);
            if p == 0.0 {
                continue;
            }
            for (&w, pw) in law.iter() {
                if pw == 0.0 {
                    continue;
                }
                let x_next = view.model_next(x, u, w);
                let row = kernel.row(xh, u, w);
                for (xh_next, q) in row.iter().enumerate() {
                    out[x_next * n + xh_next] += p * pw * q;
                }
            }
        }
    }
    out
}

/// Probability of each next observation under `Π_t` and `u`, indexed by
/// observation.
pub fn predictive_observation_probs(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    pi: &InformationState,
    u: usize,
) -> Result<Vec<f64>> {
    check_kernel(view, kernel)?;
    let predicted = predict_joint(view, kernel, pi, u);
    let n = pi.n;
    let mut out = vec![0.0; view.n_observations()];
    for x in 0..n {
        let mass: f64 = predicted[x * n..(x + 1) * n].iter().sum();
        if mass == 0.0 {
            continue;
        }
        for (y, o) in out.iter_mut().enumerate() {
            *o += mass * observation_likelihood(view, pi.t + 1, y, x);
        }
    }
    Ok(out)
}

/// One Bayes step: predict with the joint transition, correct on the model
/// coordinate, renormalize.
pub fn phi_update(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    pi: &InformationState,
    y_next: usize,
    u: usize,
) -> Result<InformationState> {
    check_kernel(view, kernel)?;
    if pi.t >= view.horizon() {
        return Err(Error::Domain(format!(
            "no update past the horizon (t={})",
            pi.t
        )));
    }
    let n = pi.n;
    let mut joint = predict_joint(view, kernel, pi, u);
    for x in 0..n {
        let likelihood = observation_likelihood(view, pi.t + 1, y_next, x);
        for p in &mut joint[x * n..(x + 1) * n] {
            *p *= likelihood;
        }
    }
    if !(joint.iter().sum::<f64>() > 0.0) {
        return Err(impossible(view, pi.t + 1, y_next));
    }
    InformationState::from_weights(pi.t + 1, n, joint)
}

/// Folds [`phi_update`] along an observation/control history.
pub fn information_state_along(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    ys: &[usize],
    us: &[usize],
) -> Result<InformationState> {
    check_history(ys, us)?;
    let mut pi = initial_information_state(view, ys[0])?;
    for (t, &u) in us.iter().enumerate() {
        pi = phi_update(view, kernel, &pi, ys[t + 1], u)?;
    }
    Ok(pi)
}

fn check_history(ys: &[usize], us: &[usize]) -> Result<()> {
    if ys.len() != us.len() + 1 {
        return Err(Error::HistoryMismatch(format!(
            "{} observations need {} controls, got {}",
            ys.len(),
            ys.len().saturating_sub(1),
            us.len()
        )));
    }
    Ok(())
}

fn correct(
    view: &ModelView<'_>,
    t: usize,
    y: usize,
    mut predicted: Vec<f64>,
) -> Result<Distribution<usize>> {
    for (x, p) in predicted.iter_mut().enumerate() {
        *p *= observation_likelihood(view, t, y, x);
    }
    if !(predicted.iter().sum::<f64>() > 0.0) {
        return Err(impossible(view, t, y));
    }
    Distribution::dense_from_weights(predicted)
}

/// `p(X_0 | y_0)`; also the actual system's initial belief, since both start
/// from the same law.
pub fn initial_belief(view: &ModelView<'_>, y0: usize) -> Result<Distribution<usize>> {
    let mut prior = vec![0.0; view.n_states()];
    for (&x, p) in view.initial().iter() {
        prior[x] = p;
    }
    correct(view, 0, y0, prior)
}

/// Predict/correct on the model marginal alone.
pub fn theta_update(
    view: &ModelView<'_>,
    t: usize,
    belief: &Distribution<usize>,
    y_next: usize,
    u: usize,
) -> Result<Distribution<usize>> {
    let mut predicted = vec![0.0; view.n_states()];
    for (&x, p) in belief.iter() {
        for (&w, pw) in view.disturbance_law(t).iter() {
            predicted[view.model_next(x, u, w)] += p * pw;
        }
    }
    correct(view, t + 1, y_next, predicted)
}

/// Predict/correct on the actual marginal. The actual dynamics are unknown
/// to the controller, so a kernel must be supplied.
pub fn theta_hat_update(
    view: &ModelView<'_>,
    t: usize,
    belief: &Distribution<usize>,
    y_hat_next: usize,
    u: usize,
    kernel: Option<&ActualKernel>,
) -> Result<Distribution<usize>> {
    let kernel = kernel.ok_or_else(|| {
        Error::Configuration("the actual-belief update needs an actual transition kernel".into())
    })?;
    check_kernel(view, kernel)?;
    let mut predicted = vec![0.0; view.n_states()];
    for (&xh, p) in belief.iter() {
        for (&w, pw) in view.disturbance_law(t).iter() {
            for (next, q) in kernel.row(xh, u, w).iter().enumerate() {
                predicted[next] += p * pw * q;
            }
        }
    }
    correct(view, t + 1, y_hat_next, predicted)
}

/// Folds [`theta_update`] along a history.
pub fn model_belief_along(
    view: &ModelView<'_>,
    ys: &[usize],
    us: &[usize],
) -> Result<Distribution<usize>> {
    check_history(ys, us)?;
    let mut belief = initial_belief(view, ys[0])?;
    for (t, &u) in us.iter().enumerate() {
        belief = theta_update(view, t, &belief, ys[t + 1], u)?;
    }
    Ok(belief)
}

/// Folds [`theta_hat_update`] along an actual-observation history.
pub fn actual_belief_along(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    y_hats: &[usize],
    us: &[usize],
) -> Result<Distribution<usize>> {
    check_history(y_hats, us)?;
    let mut belief = initial_belief(view, y_hats[0])?;
    for (t, &u) in us.iter().enumerate() {
        belief = theta_hat_update(view, t, &belief, y_hats[t + 1], u, Some(kernel))?;
    }
    Ok(belief)
}

/// Rebuilds the joint as `p(x̂ | u-history) · p(x | y-history, u-history)`
/// with `p(x̂ | u-history) = Σ_ŷ p(x̂ | ŷ-history, u-history) p(ŷ-history | u-history)`.
///
/// Every history with positive weight needs a belief; histories of zero
/// weight are ignored.
pub fn factorize(
    model_belief: &Distribution<usize>,
    actual_belief_by_history: &BTreeMap<Vec<usize>, Distribution<usize>>,
    obs_history_weight: &Distribution<Vec<usize>>,
) -> Result<InformationState> {
    let n = model_belief.len();
    let t = obs_history_weight
        .support()
        .first()
        .map_or(0, |h| h.len().saturating_sub(1));
    let mut actual = vec![0.0; n];
    for (history, weight) in obs_history_weight.iter() {
        if history.len() != t + 1 {
            return Err(Error::HistoryMismatch(format!(
                "weighted histories have mixed lengths ({} and {})",
                t + 1,
                history.len()
            )));
        }
        if weight == 0.0 {
            continue;
        }
        let belief = actual_belief_by_history.get(history).ok_or_else(|| {
            Error::HistoryMismatch(format!("no actual belief for history {history:?}"))
        })?;
        if belief.len() != n {
            return Err(Error::HistoryMismatch(format!(
                "actual belief for {history:?} has {} states, model belief has {n}",
                belief.len()
            )));
        }
        for (&xh, p) in belief.iter() {
            if xh >= n {
                return Err(Error::HistoryMismatch(format!("state index {xh} out of range")));
            }
            actual[xh] += weight * p;
        }
    }
    let mut joint = vec![0.0; n * n];
    for (&x, px) in model_belief.iter() {
        if x >= n {
            return Err(Error::HistoryMismatch(format!("state index {x} out of range")));
        }
        for (xh, pxh) in actual.iter().enumerate() {
            joint[x * n + xh] = px * pxh;
        }
    }
    InformationState::from_weights(t, n, joint)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{FiniteParts, FiniteScenario, TransitionTable};
    use crate::scenarios::builtin_discrete_toy;
    use crate::scenarios::toy::*;

    fn noiseless_identical() -> FiniteScenario {
        let parts = builtin_discrete_toy().parts();
        let model = parts.model.clone();
        FiniteScenario::new(FiniteParts {
            actual: model,
            noise_law: vec![Distribution::dense(vec![1.0, 0.0]).unwrap(); 3],
            ..parts
        })
        .unwrap()
    }

    #[test]
    fn likelihood_of_binary_symmetric_sensor() {
        let s = builtin_discrete_toy();
        let v = s.model_view();
        assert!((observation_likelihood(&v, 1, 0, OK) - 0.9).abs() < 1e-15);
        assert!((observation_likelihood(&v, 1, 1, OK) - 0.1).abs() < 1e-15);
        let s = noiseless_identical();
        let v = s.model_view();
        assert_eq!(observation_likelihood(&v, 0, 1, BROKEN), 1.0);
        assert_eq!(observation_likelihood(&v, 0, 0, BROKEN), 0.0);
    }

    #[test]
    fn likelihood_counts_noise_values() {
        // three noise values, two of which leave the reading unchanged
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            noises: vec!["a".into(), "b".into(), "c".into()],
            noise_law: vec![Distribution::dense(vec![1.0 / 3.0; 3]).unwrap(); 3],
            observation: vec![0, 0, 1, 1, 1, 0],
            ..parts
        })
        .unwrap();
        let v = s.model_view();
        assert!((observation_likelihood(&v, 2, 0, OK) - 2.0 / 3.0).abs() < 1e-15);
        assert!((observation_likelihood(&v, 2, 0, BROKEN) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn joint_transition_rows_sum_to_one() {
        let s = builtin_discrete_toy();
        let v = s.model_view();
        let k = ActualKernel::exact(&s);
        for x in 0..2 {
            for xh in 0..2 {
                for u in 0..2 {
                    let mut total = 0.0;
                    for xn in 0..2 {
                        for xhn in 0..2 {
                            total += joint_transition(&v, &k, 0, (xn, xhn), (x, xh), u);
                        }
                    }
                    assert!((total - 1.0).abs() < 1e-15);
                }
            }
        }
        // shock on a broken idle machine: model recovers, actual does not
        let p = joint_transition(&v, &k, 0, (OK, BROKEN), (BROKEN, BROKEN), IDLE);
        assert!((p - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identical_systems_stay_on_diagonal() {
        let s = noiseless_identical();
        let v = s.model_view();
        let k = ActualKernel::exact(&s);
        for x in 0..2 {
            for u in 0..2 {
                for xn in 0..2 {
                    for xhn in 0..2 {
                        let p = joint_transition(&v, &k, 0, (xn, xhn), (x, x), u);
                        if xn != xhn {
                            assert_eq!(p, 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let s = noiseless_identical();
        let v = s.model_view();
        let k = ActualKernel::exact(&s);
        let pi = initial_information_state(&v, 0).unwrap();
        // repair forces ok, which the noiseless sensor can only read as ok
        let err = phi_update(&v, &k, &pi, 1, REPAIR).unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation { t: 1, .. }));
        assert!(initial_information_state(&v, 1).is_err());
    }

    #[test]
    fn point_mass_propagates_deterministically() {
        let s = noiseless_identical();
        let v = s.model_view();
        let k = ActualKernel::exact(&s);
        let pi = initial_information_state(&v, 0).unwrap();
        assert_eq!(pi, InformationState::point(0, 2, OK, OK));
        let next = phi_update(&v, &k, &pi, 0, REPAIR).unwrap();
        assert_eq!(next, InformationState::point(1, 2, OK, OK));
    }

    #[test]
    fn theta_is_the_model_marginal_of_phi() {
        let s = builtin_discrete_toy();
        let v = s.model_view();
        let k = ActualKernel::exact(&s);
        for ys in [[0, 0, 0], [0, 1, 0], [1, 1, 1], [0, 1, 1]] {
            for us in [[IDLE, IDLE], [IDLE, REPAIR], [REPAIR, IDLE]] {
                let pi = information_state_along(&v, &k, &ys, &us).unwrap();
                let theta = model_belief_along(&v, &ys, &us).unwrap();
                for (a, b) in pi.model_marginal().iter().zip(theta.mass()) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn uninformative_sensor_only_propagates() {
        let parts = builtin_discrete_toy().parts();
        let s = FiniteScenario::new(FiniteParts {
            initial: Distribution::dense(vec![0.5, 0.5]).unwrap(),
            noise_law: vec![Distribution::dense(vec![0.5, 0.5]).unwrap(); 3],
            ..parts
        })
        .unwrap();
        let v = s.model_view();
        let prior = initial_belief(&v, 0).unwrap();
        assert_eq!(prior.mass(), &[0.5, 0.5]);
        let next = theta_update(&v, 0, &prior, 1, IDLE).unwrap();
        // idle: calm keeps, shock flips; a uniform prior stays uniform
        assert!((next.mass()[0] - 0.5).abs() < 1e-15);
        let next = theta_update(&v, 0, &prior, 1, REPAIR).unwrap();
        assert_eq!(next.mass(), &[1.0, 0.0]);
    }

    #[test]
    fn theta_hat_needs_a_kernel() {
        let s = builtin_discrete_toy();
        let v = s.model_view();
        let b = initial_belief(&v, 0).unwrap();
        let err = theta_hat_update(&v, 0, &b, 0, IDLE, None).unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn factorize_with_point_weight_is_an_outer_product() {
        let model = Distribution::dense(vec![0.3, 0.7]).unwrap();
        let actual = Distribution::dense(vec![0.6, 0.4]).unwrap();
        let mut by_history = BTreeMap::new();
        by_history.insert(vec![0, 1], actual);
        let weight = Distribution::point(vec![0, 1]);
        let pi = factorize(&model, &by_history, &weight).unwrap();
        assert_eq!(pi.t(), 1);
        let expect = [0.18, 0.12, 0.42, 0.28];
        for (a, b) in pi.joint().iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn factorize_ignores_zero_weight_histories() {
        let model = Distribution::dense(vec![0.5, 0.5]).unwrap();
        let mut by_history = BTreeMap::new();
        by_history.insert(vec![0], Distribution::dense(vec![0.2, 0.8]).unwrap());
        let with_zero =
            Distribution::new(vec![vec![0], vec![1]], vec![1.0, 0.0]).unwrap();
        let without = Distribution::point(vec![0]);
        assert_eq!(
            factorize(&model, &by_history, &with_zero).unwrap(),
            factorize(&model, &by_history, &without).unwrap()
        );
        let missing = Distribution::new(vec![vec![0], vec![1]], vec![0.5, 0.5]).unwrap();
        assert!(matches!(
            factorize(&model, &by_history, &missing),
            Err(Error::HistoryMismatch(_))
        ));
    }

    #[test]
    fn kernel_from_rows_rejects_unnormalized() {
        let err = ActualKernel::from_rows(2, 1, 1, vec![0.5, 0.4, 1.0, 0.0]).unwrap_err();
        assert!(matches!(err, Error::Invariant { invariant: "normalization", .. }));
        let table = TransitionTable::from_fn(2, 1, 1, |x, _, _| x).unwrap();
        assert_eq!(table.get(1, 0, 0), 1);
    }
}
