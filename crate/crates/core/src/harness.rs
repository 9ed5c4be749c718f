//! Parallel rollouts of the model and actual systems under one controller,
//! Monte Carlo cost estimates and run logs.
//!
//! Both systems start from the same `x₀` and consume the same disturbance,
//! noise and control sequences. Each rollout draws its primitives from its
//! own RNG stream, so results do not depend on thread scheduling.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;

use crate::enumerate::HistoryPolicy;
use crate::error::{Error, Result};
use crate::learner::{learned_state_for_history, EmpiricalConditional};
use crate::problem::{
    stream_rng, ActualKernel, FiniteScenario, LinearGaussianScenario, ModelView, Plant,
    StepRecord, Trajectory,
};
use crate::solver::{GridStrategy, LinearStrategy, MatchingStrategy};

/// Everything a controller may look at when choosing `u_t`.
///
/// Not every controller uses every field: history-based controllers read
/// only the observation and control histories, while the matching
/// controller needs both states and the current disturbance.
#[derive(Debug)]
pub struct DecisionContext<'a, P: Plant> {
    pub t: usize,
    /// Model-system observations `y_0..y_t`.
    pub ys: &'a [P::Observation],
    /// Actual-system observations `ŷ_0..ŷ_t`.
    pub y_hats: &'a [P::Observation],
    /// Controls `u_0..u_{t-1}`.
    pub us: &'a [P::Control],
    pub model_state: P::State,
    pub actual_state: P::State,
    pub disturbance: P::Disturbance,
}

pub trait Controller<P: Plant>: Sync {
    /// Short identifier written into run logs.
    fn id(&self) -> String;

    fn decide(&self, ctx: &DecisionContext<'_, P>) -> Result<P::Control>;
}

/// Adapts a history policy `(t, y_{0:t}, u_{0:t-1}) ↦ u_t` on a finite
/// scenario.
pub struct HistoryController<H> {
    id: String,
    policy: H,
}

impl<H: HistoryPolicy> HistoryController<H> {
    pub fn new(id: impl Into<String>, policy: H) -> Self {
        Self {
            id: id.into(),
            policy,
        }
    }
}

impl<H: HistoryPolicy> Controller<FiniteScenario> for HistoryController<H> {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn decide(&self, ctx: &DecisionContext<'_, FiniteScenario>) -> Result<usize> {
        self.policy.control(ctx.t, ctx.ys, ctx.us)
    }
}

/// Grid strategy fed with information states built from learned
/// actual-observation weights.
pub struct LearnedController<'a> {
    view: ModelView<'a>,
    kernel: &'a ActualKernel,
    empirical: &'a EmpiricalConditional,
    strategy: &'a GridStrategy,
}

impl<'a> LearnedController<'a> {
    pub fn new(
        view: ModelView<'a>,
        kernel: &'a ActualKernel,
        empirical: &'a EmpiricalConditional,
        strategy: &'a GridStrategy,
    ) -> Result<Self> {
        if view.scenario_hash() != strategy.scenario_hash() {
            return Err(Error::HashMismatch {
                expected: strategy.scenario_hash().to_string(),
                found: view.scenario_hash(),
            });
        }
        Ok(Self {
            view,
            kernel,
            empirical,
            strategy,
        })
    }
}

impl Controller<FiniteScenario> for LearnedController<'_> {
    fn id(&self) -> String {
        format!("learned-{}", self.strategy.grid().kind())
    }

    fn decide(&self, ctx: &DecisionContext<'_, FiniteScenario>) -> Result<usize> {
        let pi = learned_state_for_history(&self.view, self.kernel, self.empirical, ctx.ys, ctx.us)?;
        self.strategy.control(ctx.t, &pi.state)
    }
}

pub struct MatchingController {
    strategy: MatchingStrategy,
}

impl MatchingController {
    pub fn new(strategy: MatchingStrategy) -> Self {
        Self { strategy }
    }
}

impl Controller<LinearGaussianScenario> for MatchingController {
    fn id(&self) -> String {
        "matching".into()
    }

    fn decide(&self, ctx: &DecisionContext<'_, LinearGaussianScenario>) -> Result<f64> {
        self.strategy
            .control(ctx.t, ctx.model_state, ctx.actual_state, ctx.disturbance)
    }
}

/// Linear output feedback on the actual observations.
pub struct LinearFeedback {
    id: String,
    strategy: LinearStrategy,
}

impl LinearFeedback {
    pub fn new(id: impl Into<String>, strategy: LinearStrategy) -> Self {
        Self {
            id: id.into(),
            strategy,
        }
    }
}

impl Controller<LinearGaussianScenario> for LinearFeedback {
    fn id(&self) -> String {
        self.id.clone()
    }

    fn decide(&self, ctx: &DecisionContext<'_, LinearGaussianScenario>) -> Result<f64> {
        self.strategy.control(ctx.t, ctx.y_hats)
    }
}

/// One parallel rollout on RNG stream `index` of `seed`.
pub fn run_rollout<P, C>(plant: &P, controller: &C, seed: u64, index: u64) -> Result<Trajectory<P>>
where
    P: Plant,
    C: Controller<P> + ?Sized,
{
    let primitives = plant.draw_primitives(&mut stream_rng(seed, index));
    let horizon = plant.horizon();
    let (mut x, mut x_hat) = (primitives.x0, primitives.x0);
    let mut ys = Vec::with_capacity(horizon + 1);
    let mut y_hats = Vec::with_capacity(horizon + 1);
    let mut us = Vec::with_capacity(horizon);
    let mut records = Vec::with_capacity(horizon + 1);

    for t in 0..horizon {
        let z = primitives.z[t];
        let w = primitives.w[t];
        ys.push(plant.observe(t, x, z)?);
        y_hats.push(plant.observe(t, x_hat, z)?);
        let u = controller.decide(&DecisionContext {
            t,
            ys: &ys,
            y_hats: &y_hats,
            us: &us,
            model_state: x,
            actual_state: x_hat,
            disturbance: w,
        })?;
        plant.check_control(t, u)?;
        let x_next = plant.step_model(t, x, u, w)?;
        let x_hat_next = plant.step_actual(t, x_hat, u, w)?;
        records.push(StepRecord {
            t,
            x,
            x_hat,
            y: ys[t],
            y_hat: y_hats[t],
            u: Some(u),
            w: Some(w),
            z,
            cost_model: plant.stage_cost(t, x, u)?,
            cost_actual: plant.stage_cost(t, x_hat, u)?,
            penalty: Some(plant.beta() * plant.discrepancy(x_next, x_hat_next)),
        });
        us.push(u);
        x = x_next;
        x_hat = x_hat_next;
    }
    let z = primitives.z[horizon];
    records.push(StepRecord {
        t: horizon,
        x,
        x_hat,
        y: plant.observe(horizon, x, z)?,
        y_hat: plant.observe(horizon, x_hat, z)?,
        u: None,
        w: None,
        z,
        cost_model: plant.terminal_cost(x)?,
        cost_actual: plant.terminal_cost(x_hat)?,
        penalty: None,
    });
    Ok(Trajectory { records })
}

/// The rollout on stream 0.
pub fn run_parallel<P, C>(plant: &P, controller: &C, seed: u64) -> Result<Trajectory<P>>
where
    P: Plant,
    C: Controller<P> + ?Sized,
{
    run_rollout(plant, controller, seed, 0)
}

/// `n` rollouts on streams `0..n`, in stream order.
pub fn run_rollouts<P, C>(plant: &P, controller: &C, n: usize, seed: u64) -> Result<Vec<Trajectory<P>>>
where
    P: Plant,
    C: Controller<P> + ?Sized,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| run_rollout(plant, controller, seed, i))
        .collect()
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
}

impl Estimate {
    fn from_samples(samples: impl Iterator<Item = f64> + Clone, n: usize) -> Self {
        let mean = samples.clone().sum::<f64>() / n as f64;
        let std_error = if n > 1 {
            let var = samples.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, std_error }
    }

    /// Whether `value` lies within `k` standard errors of the mean.
    pub fn covers(&self, value: f64, k: f64) -> bool {
        (self.mean - value).abs() <= k * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub rollouts: usize,
    pub actual: Estimate,
    pub penalized: Estimate,
    pub model: Estimate,
    pub penalty: Estimate,
}

/// Monte Carlo estimate of the realized costs over `n` rollouts. Sums are
/// accumulated in stream order.
pub fn monte_carlo_cost<P, C>(plant: &P, controller: &C, n: usize, seed: u64) -> Result<McEstimate>
where
    P: Plant,
    C: Controller<P> + ?Sized,
{
    if n == 0 {
        return Err(Error::Configuration("rollout count must be positive".into()));
    }
    let totals: Vec<[f64; 4]> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let tr = run_rollout(plant, controller, seed, i)?;
            Ok([tr.actual_cost(), tr.penalized_cost(), tr.model_cost(), tr.total_penalty()])
        })
        .collect::<Result<_>>()?;
    let column = |k: usize| Estimate::from_samples(totals.iter().map(move |v| v[k]), n);
    Ok(McEstimate {
        rollouts: n,
        actual: column(0),
        penalized: column(1),
        model: column(2),
        penalty: column(3),
    })
}

/// Counts actual-observation histories under `controller` over `n` rollouts.
pub fn collect_empirical<C>(
    plant: &FiniteScenario,
    controller: &C,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<EmpiricalConditional>
where
    C: Controller<FiniteScenario> + ?Sized,
{
    let mut emp = EmpiricalConditional::new(plant.n_observations(), alpha)?;
    if n == 0 {
        return Err(Error::Configuration("rollout count must be positive".into()));
    }
    let runs: Vec<(Vec<usize>, Vec<usize>)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let tr = run_rollout(plant, controller, seed, i)?;
            Ok((tr.controls(), tr.actual_observations()))
        })
        .collect::<Result<_>>()?;
    for (us, y_hats) in &runs {
        emp.record_run(us, y_hats)?;
    }
    Ok(emp)
}

/// Per-step comparison of the two systems along one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct StepAudit {
    pub t: usize,
    /// `|x_t − x̂_t|`.
    pub gap: f64,
    pub cost_model: f64,
    pub cost_actual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchingAudit {
    pub steps: Vec<StepAudit>,
    pub max_gap: f64,
    pub total_penalty: f64,
    pub model_cost: f64,
    pub actual_cost: f64,
}

/// Tolerance used by [`MatchingAudit::zero_penalty`] and
/// [`MatchingAudit::costs_equal`].
pub const AUDIT_TOLERANCE: f64 = 1e-9;

impl MatchingAudit {
    pub fn zero_penalty(&self) -> bool {
        self.total_penalty.abs() <= AUDIT_TOLERANCE
    }

    pub fn costs_equal(&self) -> bool {
        (self.model_cost - self.actual_cost).abs() <= AUDIT_TOLERANCE
    }
}

pub fn matching_audit<P: Plant>(plant: &P, trajectory: &Trajectory<P>) -> MatchingAudit {
    let steps: Vec<StepAudit> = trajectory
        .records
        .iter()
        .map(|r| StepAudit {
            t: r.t,
            gap: plant.discrepancy(r.x, r.x_hat).sqrt(),
            cost_model: r.cost_model,
            cost_actual: r.cost_actual,
        })
        .collect();
    MatchingAudit {
        max_gap: steps.iter().map(|s| s.gap).fold(0.0, f64::max),
        steps,
        total_penalty: trajectory.total_penalty(),
        model_cost: trajectory.model_cost(),
        actual_cost: trajectory.actual_cost(),
    }
}

pub const RUN_LOG_COLUMNS: &str = "rollout,t,x,x_hat,y,y_hat,u,w,z,c_model,c_actual,penalty";

/// CSV of every step of every rollout, followed by a commented summary.
pub fn write_run_log<P: Plant>(
    plant: &P,
    strategy_id: &str,
    seed: u64,
    trajectories: &[Trajectory<P>],
) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# run_log v1 scenario={};strategy={strategy_id};seed={seed};beta={};tool={};timestamp=-",
        plant.scenario_hash(),
        plant.beta(),
        crate::TOOL_VERSION
    );
    let _ = writeln!(out, "{RUN_LOG_COLUMNS}");
    for (i, tr) in trajectories.iter().enumerate() {
        for r in &tr.records {
            let _ = writeln!(
                out,
                "{i},{},{},{},{},{},{},{},{},{},{},{}",
                r.t,
                plant.state_label(r.x),
                plant.state_label(r.x_hat),
                plant.observation_label(r.y),
                plant.observation_label(r.y_hat),
                r.u.map(|u| plant.control_label(u)).unwrap_or_default(),
                r.w.map(|w| plant.disturbance_label(w)).unwrap_or_default(),
                plant.noise_label(r.z),
                r.cost_model,
                r.cost_actual,
                r.penalty.map(|p| p.to_string()).unwrap_or_default(),
            );
        }
    }
    let n = trajectories.len().max(1) as f64;
    let mean = |f: fn(&Trajectory<P>) -> f64| trajectories.iter().map(f).sum::<f64>() / n;
    let _ = writeln!(
        out,
        "# summary rollouts={} mean_actual={} mean_penalized={} mean_model={} mean_penalty={}",
        trajectories.len(),
        mean(Trajectory::actual_cost),
        mean(Trajectory::penalized_cost),
        mean(Trajectory::model_cost),
        mean(Trajectory::total_penalty),
    );
    out
}

/// One parsed run-log row; labels are kept as written.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub rollout: usize,
    pub t: usize,
    pub x: String,
    pub x_hat: String,
    pub y: String,
    pub y_hat: String,
    pub u: Option<String>,
    pub w: Option<String>,
    pub z: String,
    pub cost_model: f64,
    pub cost_actual: f64,
    pub penalty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub header: BTreeMap<String, String>,
    pub rows: Vec<LogRow>,
    pub summary: BTreeMap<String, String>,
}

impl RunLog {
    /// Per-rollout `(actual, penalized)` totals recomputed from the rows.
    pub fn recomputed_totals(&self) -> Vec<(f64, f64)> {
        let mut totals: Vec<(f64, f64)> = Vec::new();
        for row in &self.rows {
            if totals.len() <= row.rollout {
                totals.resize(row.rollout + 1, (0.0, 0.0));
            }
            let entry = &mut totals[row.rollout];
            entry.0 += row.cost_actual;
            entry.1 += row.cost_model + row.penalty.unwrap_or(0.0);
        }
        totals
    }
}

fn key_values(text: &str, sep: char) -> BTreeMap<String, String> {
    text.split(sep)
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

pub fn read_run_log(text: &str) -> Result<RunLog> {
    let bad = |line: usize, m: String| Error::Parse { line, message: m };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| bad(1, "empty run log".into()))?;
    let header = key_values(
        first
            .strip_prefix("# run_log v1 ")
            .ok_or_else(|| bad(1, "not a v1 run log".into()))?,
        ';',
    );
    match lines.next() {
        Some((_, RUN_LOG_COLUMNS)) => {}
        _ => return Err(bad(2, format!("expected columns `{RUN_LOG_COLUMNS}`"))),
    }
    let mut rows = Vec::new();
    let mut summary = BTreeMap::new();
    for (n, line) in lines {
        if let Some(rest) = line.strip_prefix("# summary ") {
            summary = key_values(rest, ' ');
            continue;
        }
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 12 {
            return Err(bad(n, "expected 12 columns".into()));
        }
        let int = |s: &str| s.parse::<usize>().map_err(|_| bad(n, format!("bad integer {s:?}")));
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(n, format!("bad number {s:?}")));
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        rows.push(LogRow {
            rollout: int(c[0])?,
            t: int(c[1])?,
            x: c[2].into(),
            x_hat: c[3].into(),
            y: c[4].into(),
            y_hat: c[5].into(),
            u: opt(c[6]),
            w: opt(c[7]),
            z: c[8].into(),
            cost_model: num(c[9])?,
            cost_actual: num(c[10])?,
            penalty: if c[11].is_empty() { None } else { Some(num(c[11])?) },
        });
    }
    Ok(RunLog {
        header,
        rows,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::enumerate::exact_costs;
    use crate::scenarios::toy::*;
    use crate::scenarios::{builtin_discrete_toy, builtin_lqg};

    fn always(u: usize) -> HistoryController<impl HistoryPolicy> {
        HistoryController::new(format!("const-{u}"), move |_: usize, _: &[usize], _: &[usize]| u)
    }

    #[test]
    fn rollouts_reproduce_per_stream() {
        let s = builtin_discrete_toy();
        let c = always(IDLE);
        let a = run_rollout(&s, &c, 7, 3).unwrap();
        let b = run_rollout(&s, &c, 7, 3).unwrap();
        assert_eq!(a, b);
        let all = run_rollouts(&s, &c, 5, 7).unwrap();
        assert_eq!(all[3], a);
        assert_eq!(run_parallel(&s, &c, 7).unwrap(), all[0]);
    }

    #[test]
    fn trajectory_shape() {
        let s = builtin_discrete_toy();
        let tr = run_parallel(&s, &always(REPAIR), 1).unwrap();
        assert_eq!(tr.records.len(), 3);
        assert!(tr.records[2].u.is_none() && tr.records[2].penalty.is_none());
        assert_eq!(tr.records[0].x, tr.records[0].x_hat);
    }

    #[test]
    fn monte_carlo_agrees_with_enumeration() {
        let s = builtin_discrete_toy();
        let policy = |_: usize, _: &[usize], _: &[usize]| IDLE;
        let exact = exact_costs(&s, &policy).unwrap();
        let mc = monte_carlo_cost(&s, &HistoryController::new("idle", policy), 20_000, 3).unwrap();
        assert!(mc.actual.covers(exact.actual, 4.0), "{mc:?} vs {exact:?}");
        assert!(mc.penalized.covers(exact.penalized, 4.0));
    }

    #[test]
    fn zero_rollouts_is_a_usage_error() {
        let s = builtin_discrete_toy();
        let err = monte_carlo_cost(&s, &always(IDLE), 0, 0).unwrap_err();
        assert_eq!(err.class(), crate::ErrorClass::Usage);
    }

    #[test]
    fn matching_keeps_systems_together() {
        let s = builtin_lqg();
        let c = MatchingController::new(MatchingStrategy::exact(&s));
        for i in 0..50 {
            let tr = run_rollout(&s, &c, 11, i).unwrap();
            let audit = matching_audit(&s, &tr);
            assert!(audit.max_gap < 1e-9, "{audit:?}");
            assert!(audit.zero_penalty() && audit.costs_equal());
        }
    }

    #[test]
    fn run_log_round_trip() {
        let s = builtin_discrete_toy();
        let trs = run_rollouts(&s, &always(IDLE), 4, 9).unwrap();
        let text = write_run_log(&s, "const-idle", 9, &trs);
        let log = read_run_log(&text).unwrap();
        assert_eq!(log.header["strategy"], "const-idle");
        assert_eq!(log.header["scenario"], s.scenario_hash());
        assert_eq!(log.rows.len(), 12);
        assert_eq!(log.summary["rollouts"], "4");
        for (tr, (actual, penalized)) in trs.iter().zip(log.recomputed_totals()) {
            assert!((tr.actual_cost() - actual).abs() < 1e-12);
            assert!((tr.penalized_cost() - penalized).abs() < 1e-12);
        }
    }

    #[test]
    fn empirical_counts_every_prefix() {
        let s = builtin_discrete_toy();
        let emp = collect_empirical(&s, &always(IDLE), 100, 0, 0.0).unwrap();
        assert_eq!(emp.total(&[]), 100);
        assert_eq!(emp.total(&[IDLE]), 100);
        assert_eq!(emp.total(&[IDLE, IDLE]), 100);
        assert_eq!(emp.total(&[REPAIR]), 0);
    }
}
