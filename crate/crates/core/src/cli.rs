//! The `sepctl` command line.
//!
//! Verbs: `solve`, `simulate`, `learn`, `verify`, `report`. Every verb takes
//! the same flags and writes comma-separated artifacts into `--out`; each
//! artifact starts with a comment line carrying the scenario hash and the
//! tool version.
//!
//! Exit codes: 0 success, 1 internal error, 2 usage, 3 parse,
//! 4 verification failure, 5 insufficient data, 6 grid resolution.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::enumerate::{
    actual_observation_law_under, direct_conditional, enumerate_outcomes, exact_belief_factor,
    exact_costs, history_conditionals, reachable_histories, simulate, verify_policy_independence,
    HistoryPolicy, TabularStrategy,
};
use crate::error::{Error, ErrorClass, Result};
use crate::filter::information_state_along;
use crate::harness::{
    matching_audit, monte_carlo_cost, run_rollouts, write_run_log, Controller, HistoryController,
    LearnedController, LinearFeedback, MatchingController, AUDIT_TOLERANCE,
};
use crate::learner::{learned_state_for_history, tv_distance, EmpiricalConditional, KernelEstimator};
use crate::problem::{ActualKernel, FiniteScenario, LinearGaussianScenario, Plant, Scenario, Trajectory};
use crate::scenarios::resolve;
use crate::solver::{
    dp_solve, exact_linear_costs, exhaustive_oracle, lqg_report, write_value_table, BeliefGrid,
    BeliefPolicy, GridStrategy, LinearStrategy, LqgReport, MatchingStrategy, ValueFunction,
};

pub const EXIT_SUCCESS: u8 = 0;
pub const EXIT_INTERNAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_PARSE: u8 = 3;
pub const EXIT_VERIFICATION: u8 = 4;
pub const EXIT_INSUFFICIENT_DATA: u8 = 5;
pub const EXIT_RESOLUTION: u8 = 6;

/// Tolerance for exact (enumerated) comparisons in `verify`.
pub const EXACT_CHECK_TOLERANCE: f64 = 1e-12;
/// Agreement required between the stagewise procedure and the grid oracle.
pub const ORACLE_AGREEMENT_TOLERANCE: f64 = 1e-6;
/// Monte Carlo estimates must lie within this many standard errors.
pub const MC_STANDARD_ERRORS: f64 = 3.0;

#[derive(Debug, Parser)]
#[command(name = "sepctl", version, about = "Separated learning and control for model/actual system pairs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Derive the separated strategy (value table or linear coefficients).
    Solve(CommonArgs),
    /// Run parallel model/actual rollouts and write a run log.
    Simulate(CommonArgs),
    /// Estimate actual-observation conditionals from rollouts.
    Learn(CommonArgs),
    /// Run the oracle checks and report pass/fail.
    Verify(CommonArgs),
    /// Write plotting tables: cost and TV against sample count, penalty per step.
    Report(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// `builtin:toy`, `builtin:lqg` or a scenario file path.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub rollouts: usize,
    /// Overrides the scenario's penalty weight.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Simplex lattice resolution; the exact reachable grid when absent.
    #[arg(long)]
    pub grid_delta: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub smoothing_alpha: f64,
    #[arg(long, default_value = "sepctl-out")]
    pub out: PathBuf,
}

impl Command {
    pub fn args(&self) -> &CommonArgs {
        match self {
            Command::Solve(a)
            | Command::Simulate(a)
            | Command::Learn(a)
            | Command::Verify(a)
            | Command::Report(a) => a,
        }
    }

    pub fn verb(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Simulate(_) => "simulate",
            Command::Learn(_) => "learn",
            Command::Verify(_) => "verify",
            Command::Report(_) => "report",
        }
    }
}

/// Result of a command that ran to completion.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub artifacts: Vec<PathBuf>,
    /// False only for a `verify` with a failing gating check.
    pub passed: bool,
}

pub fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Usage => EXIT_USAGE,
        ErrorClass::Parse => EXIT_PARSE,
        ErrorClass::Resolution => EXIT_RESOLUTION,
        ErrorClass::InsufficientData => EXIT_INSUFFICIENT_DATA,
        ErrorClass::Internal => EXIT_INTERNAL,
    }
}

fn class_name(class: ErrorClass) -> &'static str {
    match class {
        ErrorClass::Usage => "usage",
        ErrorClass::Parse => "parse",
        ErrorClass::Resolution => "resolution",
        ErrorClass::InsufficientData => "insufficient-data",
        ErrorClass::Internal => "internal",
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the exit code. Human-readable progress goes to `stdout`; errors go to
/// `stderr` as `error[<class>]: <message>`.
pub fn run_from_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_SUCCESS };
            let text = e.render().to_string();
            let sink: &mut dyn Write = if e.use_stderr() { stderr } else { stdout };
            let _ = write!(sink, "{text}");
            return code;
        }
    };
    match run_command(&cli.command, stdout) {
        Ok(outcome) if outcome.passed => EXIT_SUCCESS,
        Ok(_) => {
            let _ = writeln!(stderr, "error[verification]: at least one gating check failed");
            EXIT_VERIFICATION
        }
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", class_name(e.class()));
            exit_code(e.class())
        }
    }
}

pub fn main() -> ExitCode {
    let code = run_from_args(
        std::env::args_os(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    ExitCode::from(code)
}

/// Runs one verb and writes its artifacts.
pub fn run_command(command: &Command, stdout: &mut dyn Write) -> Result<Outcome> {
    let args = command.args();
    if args.rollouts == 0 && !matches!(command, Command::Solve(_)) {
        return Err(Error::Configuration("--rollouts must be at least 1".into()));
    }
    if !(args.smoothing_alpha >= 0.0) || !args.smoothing_alpha.is_finite() {
        return Err(Error::Configuration("--smoothing-alpha must be a finite value >= 0".into()));
    }
    if let Some(delta) = args.grid_delta {
        if !(delta > 0.0 && delta <= 2.0) {
            return Err(Error::Configuration("--grid-delta must lie in (0, 2]".into()));
        }
    }
    let mut scenario = resolve(&args.scenario)?;
    if let Some(beta) = args.beta {
        scenario = scenario.with_beta(beta)?;
    }
    fs::create_dir_all(&args.out).map_err(|e| io_error(&args.out, e))?;
    let mut ctx = Context {
        args,
        out: stdout,
        artifacts: Vec::new(),
    };
    let passed = match (command, &scenario) {
        (Command::Solve(_), Scenario::Finite(s)) => solve_finite(&mut ctx, s)?,
        (Command::Solve(_), Scenario::LinearGaussian(s)) => solve_linear(&mut ctx, s)?,
        (Command::Simulate(_), Scenario::Finite(s)) => simulate_finite(&mut ctx, s)?,
        (Command::Simulate(_), Scenario::LinearGaussian(s)) => simulate_linear(&mut ctx, s)?,
        (Command::Learn(_), Scenario::Finite(s)) => learn(&mut ctx, s)?,
        (Command::Learn(_), Scenario::LinearGaussian(_)) => {
            return Err(Error::UnsupportedRepresentation(
                "learn needs a finite scenario".into(),
            ))
        }
        (Command::Verify(_), Scenario::Finite(s)) => verify_finite(&mut ctx, s)?,
        (Command::Verify(_), Scenario::LinearGaussian(s)) => verify_linear(&mut ctx, s)?,
        (Command::Report(_), Scenario::Finite(s)) => report_finite(&mut ctx, s)?,
        (Command::Report(_), Scenario::LinearGaussian(s)) => report_linear(&mut ctx, s)?,
    };
    Ok(Outcome {
        artifacts: ctx.artifacts,
        passed,
    })
}

struct Context<'a> {
    args: &'a CommonArgs,
    out: &'a mut dyn Write,
    artifacts: Vec<PathBuf>,
}

impl Context<'_> {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.args.out.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        let _ = writeln!(self.out, "wrote {}", path.display());
        self.artifacts.push(path);
        Ok(())
    }

    fn say(&mut self, line: impl AsRef<str>) {
        let _ = writeln!(self.out, "{}", line.as_ref());
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn header(kind: &str, scenario_hash: &str) -> String {
    format!(
        "# {kind} v1 scenario_hash={scenario_hash} tool={}\n",
        crate::TOOL_VERSION
    )
}

/// Sample counts `10, 100, ...` below `n`, then `n`.
fn checkpoints(n: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut k = 10;
    while k < n {
        out.push(k);
        k *= 10;
    }
    out.push(n);
    out
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

// ---- finite family ----------------------------------------------------------

struct FiniteSolution {
    kernel: ActualKernel,
    values: ValueFunction,
    strategy: GridStrategy,
}

fn solve_dp(s: &FiniteScenario, delta: Option<f64>) -> Result<FiniteSolution> {
    let view = s.model_view();
    // the harness and verification code may use the scenario's own kernel
    let kernel = ActualKernel::exact(s);
    let grid = match delta {
        Some(d) => BeliefGrid::simplex(&view, d)?,
        None => BeliefGrid::reachable(&view, &kernel)?,
    };
    let (values, strategy) = dp_solve(&view, &kernel, Arc::new(grid))?;
    let strategy = strategy.as_grid()?.clone();
    Ok(FiniteSolution {
        kernel,
        values,
        strategy,
    })
}

fn solve_finite(ctx: &mut Context<'_>, s: &FiniteScenario) -> Result<bool> {
    let sol = solve_dp(s, ctx.args.grid_delta)?;
    ctx.write("value_table.csv", &write_value_table(s, &sol.values, &sol.strategy))?;
    let grid = sol.strategy.grid();
    ctx.say(format!(
        "V_0 = {} ({} grid, {} points at t=0)",
        sol.values.initial_value(),
        grid.kind(),
        grid.len(0)
    ));
    Ok(true)
}

fn dp_controller<'a>(s: &'a FiniteScenario, sol: &'a FiniteSolution) -> HistoryController<BeliefPolicy<'a>> {
    HistoryController::new(
        format!("separated-dp-{}", sol.strategy.grid().kind()),
        BeliefPolicy::new(s.model_view(), &sol.kernel, &sol.strategy),
    )
}

fn cost_summary_row<P: Plant, C: Controller<P>>(
    plant: &P,
    controller: &C,
    n: usize,
    seed: u64,
    exact: Option<(f64, f64)>,
) -> Result<String> {
    let mc = monte_carlo_cost(plant, controller, n, seed)?;
    Ok(format!(
        "{},{},{},{},{},{},{},{},{},{}\n",
        controller.id(),
        mc.rollouts,
        mc.actual.mean,
        mc.actual.std_error,
        mc.penalized.mean,
        mc.penalized.std_error,
        mc.model.mean,
        mc.penalty.mean,
        fmt_opt(exact.map(|e| e.0)),
        fmt_opt(exact.map(|e| e.1)),
    ))
}

const COST_SUMMARY_COLUMNS: &str = "strategy,rollouts,actual_mean,actual_se,penalized_mean,penalized_se,model_mean,penalty_mean,exact_actual,exact_penalized\n";

fn simulate_finite(ctx: &mut Context<'_>, s: &FiniteScenario) -> Result<bool> {
    let sol = solve_dp(s, ctx.args.grid_delta)?;
    let controller = dp_controller(s, &sol);
    let (n, seed) = (ctx.args.rollouts, ctx.args.seed);
    let trajectories = run_rollouts(s, &controller, n, seed)?;
    ctx.write("run_log.csv", &write_run_log(s, &controller.id(), seed, &trajectories))?;
    let exact = exact_costs(s, &BeliefPolicy::new(s.model_view(), &sol.kernel, &sol.strategy)).ok();
    let mut table = header("cost_summary", &s.scenario_hash());
    table.push_str(COST_SUMMARY_COLUMNS);
    table.push_str(&cost_summary_row(s, &controller, n, seed, exact.map(|e| (e.actual, e.penalized)))?);
    ctx.write("cost_summary.csv", &table)?;
    let actual: Vec<f64> = trajectories.iter().map(Trajectory::actual_cost).collect();
    let (mean, se) = mean_and_se(&actual);
    ctx.say(format!("{n} rollouts: actual cost {mean:.6} ± {se:.2e} (V_0 = {:.6})", sol.values.initial_value()));
    Ok(true)
}

/// Learned-information-state diagnostics for every history the DP strategy
/// reaches.
fn learn(ctx: &mut Context<'_>, s: &FiniteScenario) -> Result<bool> {
    let sol = solve_dp(s, ctx.args.grid_delta)?;
    let controller = dp_controller(s, &sol);
    let (n, seed, alpha) = (ctx.args.rollouts, ctx.args.seed, ctx.args.smoothing_alpha);
    let view = s.model_view();
    let hash = s.scenario_hash();
    let trajectories = run_rollouts(s, &controller, n, seed)?;

    let mut emp = EmpiricalConditional::new(s.n_observations(), alpha)?;
    let mut kernel_counts = KernelEstimator::new(&view);
    for tr in &trajectories {
        emp.record_run(&tr.controls(), &tr.actual_observations())?;
        for pair in tr.records.windows(2) {
            if let (Some(u), Some(w)) = (pair[0].u, pair[0].w) {
                kernel_counts.record(pair[0].x_hat, u, w, pair[1].x_hat)?;
            }
        }
    }
    let kernel = kernel_counts.estimate_with_model_fallback(&view)?;
    ctx.write("empirical_conditional.csv", &emp.to_sidecar(&hash))?;

    let policy = BeliefPolicy::new(view, &sol.kernel, &sol.strategy);
    let tv = tv_curve(s, &policy, &trajectories, alpha)?;
    ctx.write("tv_curve.csv", &tv.0)?;

    let truth = history_conditionals(s, &policy)?;
    let mut table = header("learned_states", &hash);
    table.push_str("t,y_history,u_history,samples,l1_to_exact_factorized,l1_to_true_conditional\n");
    let join = |h: &[usize]| h.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
    let mut worst: f64 = 0.0;
    for ((ys, us), (p, true_joint)) in &truth {
        if *p <= 0.0 {
            continue;
        }
        let learned = learned_state_for_history(&view, &kernel, &emp, ys, us)?;
        let factorized = exact_belief_factor(s, ys, us)?.compose()?;
        let to_true = learned.state.l1_distance(true_joint);
        worst = worst.max(to_true);
        let _ = writeln!(
            table,
            "{},{},{},{},{},{to_true}",
            us.len(),
            join(ys),
            join(us),
            learned.samples,
            learned.state.l1_distance(&factorized),
        );
    }
    ctx.write("learned_states.csv", &table)?;

    ctx.say(format!("max TV at {n} rollouts: {}", tv.1));
    ctx.say(format!(
        "{} of {} actual transition rows observed; max L1 gap to the true conditional {worst:.6}",
        kernel_counts.visited_rows(),
        s.n_states() * s.n_controls() * s.disturbances().len(),
    ));
    if sol.strategy.grid().is_exact() {
        // learned states are generally off the reachable grid
        ctx.say("learned-controller cost skipped: needs --grid-delta");
    } else {
        let learned_controller = LearnedController::new(view, &kernel, &emp, &sol.strategy)?;
        let mc = monte_carlo_cost(s, &learned_controller, n, seed.wrapping_add(1))?;
        ctx.say(format!(
            "learned-controller actual cost {:.6} ± {:.2e} (V_0 = {:.6})",
            mc.actual.mean,
            mc.actual.std_error,
            sol.values.initial_value()
        ));
    }
    Ok(true)
}

/// TV between the empirical conditional built from the first `k` rollouts
/// and the enumerated conditional under `policy`, at each checkpoint `k`.
/// Returns the table and the final maximum.
fn tv_curve(
    s: &FiniteScenario,
    policy: &dyn HistoryPolicy,
    trajectories: &[Trajectory<FiniteScenario>],
    alpha: f64,
) -> Result<(String, f64)> {
    let truth = actual_observation_law_under(s, policy, s.horizon())?;
    let mut table = header("tv_curve", &s.scenario_hash());
    table.push_str("samples,max_tv,weighted_mean_tv,histories\n");
    let mut emp = EmpiricalConditional::new(s.n_observations(), alpha)?;
    let mut recorded = 0;
    let mut last = 0.0;
    for k in checkpoints(trajectories.len()) {
        for tr in &trajectories[recorded..k] {
            emp.record_run(&tr.controls(), &tr.actual_observations())?;
        }
        recorded = k;
        let (mut max, mut weighted, mut weight, mut histories) = (0.0f64, 0.0, 0.0, 0);
        for (us, law) in &truth {
            let seen = emp.total(us);
            if seen == 0 && alpha == 0.0 {
                continue;
            }
            let d = tv_distance(&emp.query(us)?, law)?;
            max = max.max(d);
            weighted += d * seen as f64;
            weight += seen as f64;
            histories += 1;
        }
        let mean = if weight > 0.0 { weighted / weight } else { 0.0 };
        let _ = writeln!(table, "{k},{max},{mean},{histories}");
        last = max;
    }
    Ok((table, last))
}

struct CheckTable {
    text: String,
    passed: bool,
}

impl CheckTable {
    fn new(hash: &str) -> Self {
        let mut text = header("verify_report", hash);
        text.push_str("check,status,value,tolerance,gating\n");
        Self { text, passed: true }
    }

    fn check(&mut self, out: &mut dyn Write, name: &str, value: f64, tolerance: f64, ok: bool, gating: bool) {
        let status = match (ok, gating) {
            (true, _) => "pass",
            (false, true) => "fail",
            (false, false) => "info",
        };
        if gating && !ok {
            self.passed = false;
        }
        let _ = writeln!(self.text, "{name},{status},{value},{tolerance},{gating}");
        let _ = writeln!(out, "{status:>4}  {name}: {value:.6e} (tolerance {tolerance:e})");
    }

    fn skip(&mut self, out: &mut dyn Write, name: &str, reason: &str) {
        let _ = writeln!(self.text, "{name},skipped,,,false");
        let _ = writeln!(out, "skip  {name}: {reason}");
    }
}

fn verify_finite(ctx: &mut Context<'_>, s: &FiniteScenario) -> Result<bool> {
    let sol = solve_dp(s, ctx.args.grid_delta)?;
    let view = s.model_view();
    let exact_grid = sol.strategy.grid().is_exact();
    let v0 = sol.values.initial_value();
    let mut checks = CheckTable::new(&s.scenario_hash());
    let out = &mut *ctx.out;

    let outcomes = match enumerate_outcomes(s) {
        Ok(o) => o,
        Err(e @ Error::TooLarge { .. }) => {
            checks.skip(out, "enumeration", &e.to_string());
            ctx.write("verify_report.csv", &checks.text)?;
            return Ok(true);
        }
        Err(e) => return Err(e),
    };

    // information-state recursion against direct conditioning
    let mut filter_gap: f64 = 0.0;
    for t in 0..=s.horizon() {
        for (ys, us) in reachable_histories(s, t)? {
            let recursive = information_state_along(&view, &sol.kernel, &ys, &us)?;
            filter_gap = filter_gap.max(recursive.max_abs_difference(&direct_conditional(s, &ys, &us)?));
        }
    }
    checks.check(out, "filter_matches_direct_conditional", filter_gap, EXACT_CHECK_TOLERANCE, filter_gap <= EXACT_CHECK_TOLERANCE, true);

    // policy independence over pairs of distinct strategies
    let dp_policy = BeliefPolicy::new(view, &sol.kernel, &sol.strategy);
    let mut strategies: Vec<(String, TabularStrategy)> = Vec::new();
    for u in 0..s.n_controls() {
        let constant = move |_: usize, _: &[usize], _: &[usize]| u;
        strategies.push((format!("constant-{u}"), TabularStrategy::from_policy(s, &constant)?));
    }
    let nu = s.n_controls();
    let follow = move |t: usize, ys: &[usize], _: &[usize]| ys[t] % nu;
    strategies.push(("follow-observation".into(), TabularStrategy::from_policy(s, &follow)?));
    strategies.push(("separated-dp".into(), TabularStrategy::from_policy(s, &dp_policy)?));
    strategies.dedup_by(|a, b| a.1 == b.1);
    let (mut worst, mut pairs) = (0.0f64, 0);
    for i in 0..strategies.len() {
        for j in i + 1..strategies.len() {
            if strategies[i].1 == strategies[j].1 {
                continue;
            }
            let r = verify_policy_independence(s, &strategies[i].1, &strategies[j].1)?;
            if !r.vacuous {
                pairs += 1;
                worst = worst.max(r.max_discrepancy);
            }
        }
    }
    checks.check(out, "policy_independence_pairs", pairs as f64, 4.0, pairs >= 4, true);
    checks.check(out, "policy_independence_max_discrepancy", worst, EXACT_CHECK_TOLERANCE, worst <= EXACT_CHECK_TOLERANCE, true);

    // dynamic program against exhaustive search
    match exhaustive_oracle(s) {
        Ok(oracle) => {
            let gap = (v0 - oracle.min_cost).abs();
            checks.check(out, "dp_equals_oracle_minimum", gap, EXACT_CHECK_TOLERANCE, gap <= EXACT_CHECK_TOLERANCE, exact_grid);
            let slack = oracle.costs.iter().fold(f64::INFINITY, |m, c| m.min(c - v0));
            checks.check(out, "dp_lower_bounds_every_strategy", slack, -EXACT_CHECK_TOLERANCE, slack >= -EXACT_CHECK_TOLERANCE, exact_grid);
        }
        Err(e @ Error::TooLarge { .. }) => checks.skip(out, "dp_equals_oracle_minimum", &e.to_string()),
        Err(e) => return Err(e),
    }

    // cost transfer: zero penalty on a path forces equal costs on that path
    let mut transfer_gap: f64 = 0.0;
    for o in &outcomes {
        let path = simulate(s, o, &dp_policy)?;
        if path.penalty.abs() <= AUDIT_TOLERANCE {
            transfer_gap = transfer_gap.max((path.model_cost - path.actual_cost).abs());
        }
    }
    checks.check(out, "zero_penalty_paths_have_equal_costs", transfer_gap, AUDIT_TOLERANCE, transfer_gap <= AUDIT_TOLERANCE, true);
    let costs = exact_costs(s, &dp_policy)?;
    let gap = (costs.actual - v0).abs();
    let zero_penalty = costs.penalty.abs() <= EXACT_CHECK_TOLERANCE;
    checks.check(out, "instantiated_actual_cost_equals_v0", gap, EXACT_CHECK_TOLERANCE, gap <= EXACT_CHECK_TOLERANCE, zero_penalty && exact_grid);

    // factorized state against the true conditional; informational
    let mut factor_gap: f64 = 0.0;
    for t in 0..=s.horizon() {
        for (ys, us) in reachable_histories(s, t)? {
            let composed = exact_belief_factor(s, &ys, &us)?.compose()?;
            factor_gap = factor_gap.max(composed.max_abs_difference(&direct_conditional(s, &ys, &us)?));
        }
    }
    checks.check(out, "factorized_state_matches_true_conditional", factor_gap, EXACT_CHECK_TOLERANCE, factor_gap <= EXACT_CHECK_TOLERANCE, false);

    let passed = checks.passed;
    ctx.write("verify_report.csv", &checks.text)?;
    Ok(passed)
}

fn report_finite(ctx: &mut Context<'_>, s: &FiniteScenario) -> Result<bool> {
    let sol = solve_dp(s, ctx.args.grid_delta)?;
    let controller = dp_controller(s, &sol);
    let (n, seed) = (ctx.args.rollouts, ctx.args.seed);
    let trajectories = run_rollouts(s, &controller, n, seed)?;
    let policy = BeliefPolicy::new(s.model_view(), &sol.kernel, &sol.strategy);
    let exact = exact_costs(s, &policy).ok().map(|e| (e.actual, e.penalized));
    let hash = s.scenario_hash();
    ctx.write("cost_vs_samples.csv", &cost_vs_samples(&hash, &[(controller.id(), trajectories.as_slice(), exact)]))?;
    ctx.write("penalty_per_step.csv", &penalty_per_step(&hash, &[(controller.id(), trajectories.as_slice())]))?;
    let tv = tv_curve(s, &policy, &trajectories, ctx.args.smoothing_alpha)?;
    ctx.write("tv_vs_samples.csv", &tv.0)?;
    Ok(true)
}

type Series<'a, P> = (String, &'a [Trajectory<P>], Option<(f64, f64)>);

fn cost_vs_samples<P: Plant>(hash: &str, series: &[Series<'_, P>]) -> String {
    let mut table = header("cost_vs_samples", hash);
    table.push_str("strategy,samples,actual_mean,actual_se,penalized_mean,penalized_se,exact_actual,exact_penalized\n");
    for (id, trajectories, exact) in series {
        let actual: Vec<f64> = trajectories.iter().map(Trajectory::actual_cost).collect();
        let penalized: Vec<f64> = trajectories.iter().map(Trajectory::penalized_cost).collect();
        for k in checkpoints(trajectories.len()) {
            let (am, ase) = mean_and_se(&actual[..k]);
            let (pm, pse) = mean_and_se(&penalized[..k]);
            let _ = writeln!(
                table,
                "{id},{k},{am},{ase},{pm},{pse},{},{}",
                fmt_opt(exact.map(|e| e.0)),
                fmt_opt(exact.map(|e| e.1))
            );
        }
    }
    table
}

fn penalty_per_step<P: Plant>(hash: &str, series: &[(String, &[Trajectory<P>])]) -> String {
    let mut table = header("penalty_per_step", hash);
    table.push_str("strategy,t,mean_penalty,penalty_se\n");
    for (id, trajectories) in series {
        let horizon = trajectories.first().map_or(0, |tr| tr.horizon());
        for t in 0..horizon {
            let values: Vec<f64> = trajectories
                .iter()
                .map(|tr| tr.records[t].penalty.unwrap_or(0.0))
                .collect();
            let (m, se) = mean_and_se(&values);
            let _ = writeln!(table, "{id},{t},{m},{se}");
        }
    }
    table
}

// ---- linear-Gaussian family -------------------------------------------------

fn coefficient_row(source: &str, strategy: &LinearStrategy, costs: Option<crate::solver::LinearCosts>) -> String {
    let (a, b, c) = strategy
        .two_step_coefficients()
        .map(|(a, b, c)| (a.to_string(), b.to_string(), c.to_string()))
        .unwrap_or_default();
    format!(
        "{source},{a},{b},{c},{},{}\n",
        fmt_opt(costs.map(|c| c.actual)),
        fmt_opt(costs.map(|c| c.penalized))
    )
}

fn solve_linear(ctx: &mut Context<'_>, s: &LinearGaussianScenario) -> Result<bool> {
    let report = lqg_report(s)?;
    let mut table = header("lqg_strategy", &s.scenario_hash());
    let _ = writeln!(table, "# u0 = a*yhat0; u1 = b*yhat1 + c*yhat0; costs are exact expectations");
    table.push_str("source,a,b,c,actual_cost,penalized_cost\n");
    if let (Some(stated), costs) = (&report.stagewise.stated, report.stated_costs) {
        table.push_str(&coefficient_row("stated", stated, costs));
    }
    table.push_str(&coefficient_row("procedure", &report.stagewise.procedure, Some(report.procedure_costs)));
    let oracle_costs = exact_linear_costs(s, &report.oracle.strategy)?;
    table.push_str(&coefficient_row("oracle", &report.oracle.strategy, Some(oracle_costs)));
    ctx.write("lqg_strategy.csv", &table)?;
    describe_lqg(ctx, &report);
    Ok(true)
}

fn describe_lqg(ctx: &mut Context<'_>, report: &LqgReport) {
    let show = |st: &LinearStrategy| {
        st.two_step_coefficients()
            .map(|(a, b, c)| format!("a={a} b={b} c={c}"))
            .unwrap_or_default()
    };
    if let (Some(stated), Some(costs)) = (&report.stagewise.stated, report.stated_costs) {
        ctx.say(format!("stated:    {}  actual cost {}", show(stated), costs.actual));
    }
    ctx.say(format!(
        "procedure: {}  actual cost {}",
        show(&report.stagewise.procedure),
        report.procedure_costs.actual
    ));
    ctx.say(format!(
        "oracle:    {}  actual cost {} ({} grid evaluations)",
        show(&report.oracle.strategy),
        report.oracle.actual_cost,
        report.oracle.evaluated
    ));
}

/// Controllers run on a linear scenario, with exact costs where known.
fn linear_controllers(
    s: &LinearGaussianScenario,
) -> Result<(MatchingController, Vec<(LinearFeedback, crate::solver::LinearCosts)>)> {
    let matching = MatchingController::new(MatchingStrategy::exact(s));
    let mut feedback = Vec::new();
    let stagewise = crate::solver::lqg_stagewise_solve(s)?;
    if let Some(stated) = stagewise.stated {
        let costs = exact_linear_costs(s, &stated)?;
        feedback.push((LinearFeedback::new("stated", stated), costs));
    }
    let costs = exact_linear_costs(s, &stagewise.procedure)?;
    feedback.push((LinearFeedback::new("procedure", stagewise.procedure), costs));
    Ok((matching, feedback))
}

fn simulate_linear(ctx: &mut Context<'_>, s: &LinearGaussianScenario) -> Result<bool> {
    let (n, seed) = (ctx.args.rollouts, ctx.args.seed);
    let (matching, feedback) = linear_controllers(s)?;
    let trajectories = run_rollouts(s, &matching, n, seed)?;
    ctx.write("run_log.csv", &write_run_log(s, &matching.id(), seed, &trajectories))?;
    let mut table = header("cost_summary", &s.scenario_hash());
    table.push_str(COST_SUMMARY_COLUMNS);
    table.push_str(&cost_summary_row(s, &matching, n, seed, None)?);
    for (controller, costs) in &feedback {
        table.push_str(&cost_summary_row(s, controller, n, seed, Some((costs.actual, costs.penalized)))?);
    }
    ctx.write("cost_summary.csv", &table)?;
    let max_gap = trajectories
        .iter()
        .map(|tr| matching_audit(s, tr).max_gap)
        .fold(0.0, f64::max);
    ctx.say(format!("{n} matching rollouts: max |x - x_hat| = {max_gap:e}"));
    Ok(true)
}

fn verify_linear(ctx: &mut Context<'_>, s: &LinearGaussianScenario) -> Result<bool> {
    let (n, seed) = (ctx.args.rollouts, ctx.args.seed);
    let mut checks = CheckTable::new(&s.scenario_hash());
    let (matching, feedback) = linear_controllers(s)?;
    let trajectories = run_rollouts(s, &matching, n, seed)?;
    let (mut max_gap, mut transfer_gap) = (0.0f64, 0.0f64);
    for tr in &trajectories {
        let audit = matching_audit(s, tr);
        max_gap = max_gap.max(audit.max_gap);
        if audit.zero_penalty() {
            transfer_gap = transfer_gap.max((audit.model_cost - audit.actual_cost).abs());
        }
    }
    let out = &mut *ctx.out;
    checks.check(out, "matching_closes_state_gap", max_gap, AUDIT_TOLERANCE, max_gap < AUDIT_TOLERANCE, true);
    checks.check(out, "zero_penalty_rollouts_have_equal_costs", transfer_gap, AUDIT_TOLERANCE, transfer_gap <= AUDIT_TOLERANCE, true);

    match lqg_report(s) {
        Ok(report) => {
            let gap = (report.procedure_costs.actual - report.oracle.actual_cost).abs();
            checks.check(out, "procedure_matches_grid_oracle", gap, ORACLE_AGREEMENT_TOLERANCE, gap <= ORACLE_AGREEMENT_TOLERANCE, true);
            if let Some(stated) = report.stated_costs {
                let excess = stated.actual - report.oracle.actual_cost;
                checks.check(out, "stated_solution_excess_cost", excess, ORACLE_AGREEMENT_TOLERANCE, excess.abs() <= ORACLE_AGREEMENT_TOLERANCE, false);
            }
        }
        Err(e @ Error::UnsupportedRepresentation(_)) => checks.skip(out, "procedure_matches_grid_oracle", &e.to_string()),
        Err(e) => return Err(e),
    }
    for (controller, costs) in &feedback {
        let mc = monte_carlo_cost(s, controller, n, seed)?;
        let z = (mc.actual.mean - costs.actual).abs() / mc.actual.std_error.max(f64::MIN_POSITIVE);
        let name = format!("monte_carlo_{}_within_3se", controller.id());
        checks.check(out, &name, z, MC_STANDARD_ERRORS, mc.actual.covers(costs.actual, MC_STANDARD_ERRORS), true);
    }
    let passed = checks.passed;
    ctx.write("verify_report.csv", &checks.text)?;
    Ok(passed)
}

/// Strategy id, its rollouts and its exact `(actual, penalized)` costs.
type LinearRun = (String, Vec<Trajectory<LinearGaussianScenario>>, (f64, f64));

fn report_linear(ctx: &mut Context<'_>, s: &LinearGaussianScenario) -> Result<bool> {
    let (n, seed) = (ctx.args.rollouts, ctx.args.seed);
    let (matching, feedback) = linear_controllers(s)?;
    let matched = run_rollouts(s, &matching, n, seed)?;
    let runs: Vec<LinearRun> = feedback
        .iter()
        .map(|(c, costs)| Ok((c.id(), run_rollouts(s, c, n, seed)?, (costs.actual, costs.penalized))))
        .collect::<Result<_>>()?;
    let mut series: Vec<Series<'_, LinearGaussianScenario>> = vec![(matching.id(), matched.as_slice(), None)];
    series.extend(runs.iter().map(|(id, trs, e)| (id.clone(), trs.as_slice(), Some(*e))));
    let hash = s.scenario_hash();
    ctx.write("cost_vs_samples.csv", &cost_vs_samples(&hash, &series))?;
    let penalties: Vec<(String, &[Trajectory<LinearGaussianScenario>])> =
        series.iter().map(|(id, trs, _)| (id.clone(), *trs)).collect();
    ctx.write("penalty_per_step.csv", &penalty_per_step(&hash, &penalties))?;
    ctx.say("no TV table: the learner covers finite scenarios only");
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (u8, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run_from_args(args.iter().copied(), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn checkpoints_end_at_n() {
        assert_eq!(checkpoints(1), vec![1]);
        assert_eq!(checkpoints(10), vec![10]);
        assert_eq!(checkpoints(250), vec![10, 100, 250]);
    }

    #[test]
    fn missing_verb_is_usage() {
        assert_eq!(run(&["sepctl"]).0, EXIT_USAGE);
        assert_eq!(run(&["sepctl", "solve"]).0, EXIT_USAGE);
    }

    #[test]
    fn unknown_builtin_is_usage() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let (code, _, err) = run(&["sepctl", "solve", "--scenario", "builtin:nope", "--out", out]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.starts_with("error[usage]"));
    }

    #[test]
    fn exit_codes_per_class() {
        assert_eq!(exit_code(ErrorClass::Parse), 3);
        assert_eq!(exit_code(ErrorClass::InsufficientData), 5);
        assert_eq!(exit_code(ErrorClass::Resolution), 6);
    }
}
