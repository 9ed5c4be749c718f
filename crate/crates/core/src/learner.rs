//! Online estimation of what the controller cannot know offline: the law of
//! the actual system's observation history given the controls, and
//! optionally its transition kernel.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::distribution::Distribution;
use crate::enumerate::sequences;
use crate::error::{Error, Result};
use crate::filter::{self, InformationState};
use crate::problem::{ActualKernel, ModelView};
use crate::solver::SeparatedStrategy;

pub use crate::distribution::tv_distance;

/// Frequency table of actual-observation histories per control history,
/// with optional additive smoothing.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalConditional {
    n_observations: usize,
    alpha: f64,
    counts: BTreeMap<Vec<usize>, BTreeMap<Vec<usize>, u64>>,
    totals: BTreeMap<Vec<usize>, u64>,
}

impl EmpiricalConditional {
    pub fn new(n_observations: usize, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0) || !alpha.is_finite() {
            return Err(Error::Configuration(format!(
                "smoothing pseudo-count must be >= 0, got {alpha}"
            )));
        }
        if n_observations == 0 {
            return Err(Error::Configuration("observation space is empty".into()));
        }
        Ok(Self {
            n_observations,
            alpha,
            counts: BTreeMap::new(),
            totals: BTreeMap::new(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n_observations(&self) -> usize {
        self.n_observations
    }

    /// Adds one `(u-history, ŷ-history)` observation.
    pub fn record_transition(&mut self, u_history: &[usize], y_hat_history: &[usize]) -> Result<()> {
        if y_hat_history.len() != u_history.len() + 1 {
            return Err(Error::HistoryMismatch(format!(
                "{} controls need {} observations, got {}",
                u_history.len(),
                u_history.len() + 1,
                y_hat_history.len()
            )));
        }
        if let Some(y) = y_hat_history.iter().find(|y| **y >= self.n_observations) {
            return Err(Error::Domain(format!(
                "observation index {y} outside 0..{}",
                self.n_observations
            )));
        }
        *self
            .counts
            .entry(u_history.to_vec())
            .or_default()
            .entry(y_hat_history.to_vec())
            .or_default() += 1;
        *self.totals.entry(u_history.to_vec()).or_default() += 1;
        Ok(())
    }

    /// Records every prefix of a complete run.
    pub fn record_run(&mut self, u_history: &[usize], y_hat_history: &[usize]) -> Result<()> {
        if y_hat_history.len() != u_history.len() + 1 {
            return Err(Error::HistoryMismatch("run lengths disagree".into()));
        }
        for t in 0..y_hat_history.len() {
            self.record_transition(&u_history[..t], &y_hat_history[..=t])?;
        }
        Ok(())
    }

    /// Merges another table recorded with the same settings.
    pub fn merge(&mut self, other: &Self) -> Result<()> {
        if other.n_observations != self.n_observations || other.alpha != self.alpha {
            return Err(Error::Configuration("cannot merge tables with different settings".into()));
        }
        for (u, row) in &other.counts {
            let mine = self.counts.entry(u.clone()).or_default();
            for (y, c) in row {
                *mine.entry(y.clone()).or_default() += c;
            }
        }
        for (u, c) in &other.totals {
            *self.totals.entry(u.clone()).or_default() += c;
        }
        Ok(())
    }

    pub fn total(&self, u_history: &[usize]) -> u64 {
        self.totals.get(u_history).copied().unwrap_or(0)
    }

    pub fn count(&self, u_history: &[usize], y_hat_history: &[usize]) -> u64 {
        self.counts
            .get(u_history)
            .and_then(|row| row.get(y_hat_history))
            .copied()
            .unwrap_or(0)
    }

    /// Control histories seen at least once.
    pub fn control_histories(&self) -> impl Iterator<Item = &Vec<usize>> {
        self.totals.keys()
    }

    /// `p̂(ŷ_{0:t} | u_{0:t-1}) = (count + α) / (total + α·K)` over all `K`
    /// histories of length `t + 1`, in lexicographic order.
    pub fn query(&self, u_history: &[usize]) -> Result<Distribution<Vec<usize>>> {
        let support = sequences(self.n_observations, u_history.len() + 1);
        let total = self.total(u_history);
        if total == 0 && self.alpha == 0.0 {
            return Err(Error::InsufficientData(format!(
                "no runs recorded for control history {u_history:?} and no smoothing"
            )));
        }
        let weights = support
            .iter()
            .map(|y| self.count(u_history, y) as f64 + self.alpha)
            .collect();
        Distribution::from_weights(support, weights)
    }

    /// Sidecar text: one `u_history,y_hat_history,count` line per key, indices
    /// separated by spaces.
    pub fn to_sidecar(&self, scenario_hash: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# empirical_conditional v1 scenario_hash={scenario_hash} alpha={} observations={} tool={}",
            self.alpha,
            self.n_observations,
            crate::TOOL_VERSION
        );
        let _ = writeln!(out, "u_history,y_hat_history,count");
        let join = |h: &[usize]| h.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
        for (u, row) in &self.counts {
            for (y, c) in row {
                let _ = writeln!(out, "{},{},{c}", join(u), join(y));
            }
        }
        out
    }

    /// Reads a sidecar back; returns the table and the recorded scenario hash.
    pub fn from_sidecar(text: &str) -> Result<(Self, String)> {
        let bad = |line: usize, m: &str| Error::Parse {
            line,
            message: m.to_string(),
        };
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| bad(1, "empty sidecar"))?;
        let fields: BTreeMap<&str, &str> = header
            .strip_prefix("# empirical_conditional v1 ")
            .ok_or_else(|| bad(1, "not an empirical-conditional sidecar"))?
            .split(' ')
            .filter_map(|kv| kv.split_once('='))
            .collect();
        let hash = fields.get("scenario_hash").ok_or_else(|| bad(1, "missing scenario_hash"))?;
        let alpha: f64 = fields
            .get("alpha")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "missing alpha"))?;
        let n: usize = fields
            .get("observations")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad(1, "missing observations"))?;
        let mut table = Self::new(n, alpha)?;
        match lines.next() {
            Some((_, "u_history,y_hat_history,count")) => {}
            _ => return Err(bad(2, "expected column header")),
        }
        for (i, line) in lines {
            if line.is_empty() {
                continue;
            }
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 3 {
                return Err(bad(i + 1, "expected 3 columns"));
            }
            let history = |s: &str| -> Result<Vec<usize>> {
                s.split_whitespace()
                    .map(|v| v.parse().map_err(|_| bad(i + 1, "bad history index")))
                    .collect()
            };
            let u = history(cells[0])?;
            let y = history(cells[1])?;
            let count: u64 = cells[2].parse().map_err(|_| bad(i + 1, "bad count"))?;
            for _ in 0..count {
                table.record_transition(&u, &y)?;
            }
        }
        Ok((table, hash.to_string()))
    }
}

/// Counts of actual transitions `(x̂, u, w) → x̂'` from logged runs.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelEstimator {
    n_states: usize,
    n_controls: usize,
    n_disturbances: usize,
    counts: Vec<u64>,
}

impl KernelEstimator {
    pub fn new(view: &ModelView<'_>) -> Self {
        let (n, nu, nw) = (view.n_states(), view.n_controls(), view.n_disturbances());
        Self {
            n_states: n,
            n_controls: nu,
            n_disturbances: nw,
            counts: vec![0; n * nu * nw * n],
        }
    }

    pub fn record(&mut self, x_hat: usize, u: usize, w: usize, x_hat_next: usize) -> Result<()> {
        if x_hat >= self.n_states
            || x_hat_next >= self.n_states
            || u >= self.n_controls
            || w >= self.n_disturbances
        {
            return Err(Error::Domain("transition outside the declared spaces".into()));
        }
        let row = (x_hat * self.n_controls + u) * self.n_disturbances + w;
        self.counts[row * self.n_states + x_hat_next] += 1;
        Ok(())
    }

    /// Smoothed relative frequencies. A row never visited needs `alpha > 0`.
    pub fn estimate(&self, alpha: f64) -> Result<ActualKernel> {
        let n = self.n_states;
        let mut probs = Vec::with_capacity(self.counts.len());
        for (r, row) in self.counts.chunks(n).enumerate() {
            let total = row.iter().sum::<u64>() as f64 + alpha * n as f64;
            if total == 0.0 {
                return Err(Error::InsufficientData(format!(
                    "actual transition row {r} never observed and no smoothing"
                )));
            }
            probs.extend(row.iter().map(|c| (*c as f64 + alpha) / total));
        }
        ActualKernel::from_rows(n, self.n_controls, self.n_disturbances, probs)
    }

    /// Like [`estimate`](Self::estimate) with `alpha = 0`, except that rows
    /// never observed take the model's deterministic transition.
    pub fn estimate_with_model_fallback(&self, view: &ModelView<'_>) -> Result<ActualKernel> {
        let n = self.n_states;
        let mut probs = Vec::with_capacity(self.counts.len());
        for (r, row) in self.counts.chunks(n).enumerate() {
            let total = row.iter().sum::<u64>();
            if total == 0 {
                let w = r % self.n_disturbances;
                let u = (r / self.n_disturbances) % self.n_controls;
                let x_hat = r / (self.n_disturbances * self.n_controls);
                let next = view.model_next(x_hat, u, w);
                probs.extend((0..n).map(|x| if x == next { 1.0 } else { 0.0 }));
            } else {
                probs.extend(row.iter().map(|c| *c as f64 / total as f64));
            }
        }
        ActualKernel::from_rows(n, self.n_controls, self.n_disturbances, probs)
    }

    /// Rows `(x̂, u, w)` with at least one recorded transition.
    pub fn visited_rows(&self) -> usize {
        self.counts
            .chunks(self.n_states)
            .filter(|row| row.iter().any(|c| *c > 0))
            .count()
    }
}

/// Actual belief `p(x̂_t | ŷ_{0:t}, u_{0:t-1})` for every history in the
/// support of `weights` with positive weight.
pub fn actual_beliefs_by_history(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    u_history: &[usize],
    weights: &Distribution<Vec<usize>>,
) -> Result<BTreeMap<Vec<usize>, Distribution<usize>>> {
    let mut out = BTreeMap::new();
    for (history, p) in weights.iter() {
        if p == 0.0 {
            continue;
        }
        out.insert(
            history.clone(),
            filter::actual_belief_along(view, kernel, history, u_history)?,
        );
    }
    Ok(out)
}

/// Information state assembled from learned history weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedInformationState {
    pub state: InformationState,
    /// Runs recorded for the queried control history.
    pub samples: u64,
    pub alpha: f64,
    pub scenario_hash: String,
}

/// Composes the model belief, the per-history actual beliefs and the
/// empirical history weights.
pub fn learned_information_state(
    emp: &EmpiricalConditional,
    u_history: &[usize],
    model_belief: &Distribution<usize>,
    actual_belief_by_history: &BTreeMap<Vec<usize>, Distribution<usize>>,
    scenario_hash: &str,
) -> Result<LearnedInformationState> {
    let weights = emp.query(u_history)?;
    let state = filter::factorize(model_belief, actual_belief_by_history, &weights)?;
    Ok(LearnedInformationState {
        state,
        samples: emp.total(u_history),
        alpha: emp.alpha(),
        scenario_hash: scenario_hash.to_string(),
    })
}

/// Full learned state for a history: model filter along `(ys, us)`, actual
/// filter with `kernel` along each weighted history, empirical weights.
pub fn learned_state_for_history(
    view: &ModelView<'_>,
    kernel: &ActualKernel,
    emp: &EmpiricalConditional,
    ys: &[usize],
    us: &[usize],
) -> Result<LearnedInformationState> {
    let model_belief = filter::model_belief_along(view, ys, us)?;
    let weights = emp.query(us)?;
    let beliefs = actual_beliefs_by_history(view, kernel, us, &weights)?;
    learned_information_state(emp, us, &model_belief, &beliefs, &view.scenario_hash())
}

/// A separated strategy bound to one scenario, fed learned information
/// states.
#[derive(Debug, Clone)]
pub struct InstantiatedController<'a> {
    strategy: &'a SeparatedStrategy,
    scenario_hash: String,
}

/// Checks that `strategy` was solved for the scenario `pi` belongs to and
/// returns the controller.
pub fn instantiate_strategy<'a>(
    strategy: &'a SeparatedStrategy,
    pi: &LearnedInformationState,
) -> Result<InstantiatedController<'a>> {
    let expected = match strategy {
        SeparatedStrategy::Grid(g) => g.scenario_hash(),
        SeparatedStrategy::ClosedForm(m) => m.scenario_hash(),
    };
    if expected != pi.scenario_hash {
        return Err(Error::HashMismatch {
            expected: expected.to_string(),
            found: pi.scenario_hash.clone(),
        });
    }
    Ok(InstantiatedController {
        strategy,
        scenario_hash: pi.scenario_hash.clone(),
    })
}

impl InstantiatedController<'_> {
    /// `u_t` from `Π̂_t` alone: project onto the grid and read the slice of
    /// the actual-marginal mode.
    pub fn control(&self, pi: &LearnedInformationState) -> Result<usize> {
        if pi.scenario_hash != self.scenario_hash {
            return Err(Error::HashMismatch {
                expected: self.scenario_hash.clone(),
                found: pi.scenario_hash.clone(),
            });
        }
        let grid = self.strategy.as_grid()?;
        grid.control(pi.state.t(), &pi.state)
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::enumerate::{actual_observation_law, exact_belief_factor};
    use crate::scenarios::builtin_discrete_toy;
    use crate::scenarios::toy::*;
    use crate::solver::{dp_solve, BeliefGrid};

    #[test]
    fn one_record_is_a_point_mass() {
        let mut emp = EmpiricalConditional::new(2, 0.0).unwrap();
        emp.record_transition(&[IDLE], &[0, 1]).unwrap();
        let q = emp.query(&[IDLE]).unwrap();
        assert_eq!(q.prob(&vec![0, 1]), 1.0);
        assert_eq!(q.len(), 4);
        for _ in 0..9 {
            emp.record_transition(&[IDLE], &[0, 1]).unwrap();
        }
        assert_eq!(emp.query(&[IDLE]).unwrap(), q);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let mut emp = EmpiricalConditional::new(2, 0.0).unwrap();
        assert!(matches!(
            emp.record_transition(&[IDLE], &[0]),
            Err(Error::HistoryMismatch(_))
        ));
    }

    #[test]
    fn unseen_history_needs_smoothing() {
        let emp = EmpiricalConditional::new(2, 0.0).unwrap();
        assert!(matches!(emp.query(&[REPAIR]), Err(Error::InsufficientData(_))));
        let smoothed = EmpiricalConditional::new(2, 1.0).unwrap();
        let q = smoothed.query(&[REPAIR]).unwrap();
        assert!(q.mass().iter().all(|p| (*p - 0.25).abs() < 1e-15));
    }

    #[test]
    fn smoothing_formula() {
        let mut emp = EmpiricalConditional::new(2, 0.5).unwrap();
        emp.record_transition(&[], &[1]).unwrap();
        let q = emp.query(&[]).unwrap();
        // (1 + 0.5) / (1 + 2·0.5)
        assert!((q.prob(&vec![1]) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn sidecar_round_trip() {
        let mut emp = EmpiricalConditional::new(2, 0.25).unwrap();
        emp.record_run(&[IDLE, REPAIR], &[0, 1, 0]).unwrap();
        emp.record_run(&[IDLE, IDLE], &[0, 0, 0]).unwrap();
        let text = emp.to_sidecar("abc");
        let (back, hash) = EmpiricalConditional::from_sidecar(&text).unwrap();
        assert_eq!(hash, "abc");
        assert_eq!(back, emp);
    }

    #[test]
    fn exact_weights_reproduce_factorize_bit_for_bit() {
        let s = builtin_discrete_toy();
        let (ys, us) = (vec![0, 1, 0], vec![IDLE, REPAIR]);
        let factor = exact_belief_factor(&s, &ys, &us).unwrap();
        let direct = factor.compose().unwrap();
        // empirical table whose frequencies equal the exact weights is not
        // generally representable, so substitute the weights directly
        let weights = actual_observation_law(&s, &us).unwrap();
        let composed = filter::factorize(
            &factor.model_belief,
            &factor.actual_belief_by_history,
            &weights,
        )
        .unwrap();
        assert_eq!(composed, direct);
    }

    #[test]
    fn hash_mismatch_is_rejected() {
        let s = builtin_discrete_toy();
        let view = s.model_view();
        let kernel = ActualKernel::exact(&s);
        let grid = Arc::new(BeliefGrid::reachable(&view, &kernel).unwrap());
        let (_, strategy) = dp_solve(&view, &kernel, grid).unwrap();
        let pi = LearnedInformationState {
            state: InformationState::point(0, 2, OK, OK),
            samples: 1,
            alpha: 0.0,
            scenario_hash: "other".into(),
        };
        assert!(matches!(
            instantiate_strategy(&strategy, &pi),
            Err(Error::HashMismatch { .. })
        ));
        let pi = LearnedInformationState {
            scenario_hash: view.scenario_hash(),
            ..pi
        };
        let controller = instantiate_strategy(&strategy, &pi).unwrap();
        let grid = strategy.as_grid().unwrap();
        let index = grid.grid().project(0, &pi.state).unwrap().index;
        assert_eq!(controller.control(&pi).unwrap(), grid.control_at(0, index, OK));
    }

    #[test]
    fn kernel_estimate_recovers_deterministic_table() {
        let s = builtin_discrete_toy();
        let view = s.model_view();
        let mut est = KernelEstimator::new(&view);
        assert!(matches!(est.estimate(0.0), Err(Error::InsufficientData(_))));
        for xh in 0..2 {
            for u in 0..2 {
                for w in 0..2 {
                    let next = s.actual_table().get(xh, u, w);
                    est.record(xh, u, w, next).unwrap();
                }
            }
        }
        assert_eq!(est.estimate(0.0).unwrap(), ActualKernel::exact(&s));
    }
}
