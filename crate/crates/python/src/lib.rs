//! Python bindings: scenarios, the finite and linear solvers, Monte Carlo
//! evaluation, the empirical conditional and the `verify` checks.

use std::path::PathBuf;
use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sepctl::cli::{run_command, Command, CommonArgs};
use sepctl::distribution::Distribution;
use sepctl::harness::{monte_carlo_cost as mc, HistoryController, LinearFeedback, MatchingController};
use sepctl::problem::{ActualKernel, FiniteScenario, LinearGaussianScenario};
use sepctl::solver::{self, BeliefGrid, BeliefPolicy, LinearStrategy, MatchingStrategy};
use sepctl::ErrorClass;

create_exception!(pysepctl, SepctlError, PyException);
create_exception!(pysepctl, InsufficientDataError, SepctlError);

fn to_py(e: sepctl::Error) -> PyErr {
    match e.class() {
        ErrorClass::Usage | ErrorClass::Parse => PyValueError::new_err(e.to_string()),
        ErrorClass::InsufficientData => InsufficientDataError::new_err(e.to_string()),
        _ => SepctlError::new_err(e.to_string()),
    }
}

/// A finite or linear-Gaussian scenario.
#[pyclass(name = "Scenario", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: sepctl::Scenario,
}

#[pymethods]
impl PyScenario {
    /// `"toy"` or `"lqg"`.
    #[staticmethod]
    fn builtin(name: &str) -> PyResult<Self> {
        sepctl::scenarios::builtin(name).map(|inner| Self { inner }).map_err(to_py)
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let file = sepctl::scenarios::load_scenario(&path).map_err(to_py)?;
        Ok(Self { inner: file.scenario })
    }

    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        sepctl::scenarios::parse_scenario(text).map(|inner| Self { inner }).map_err(to_py)
    }

    fn serialize(&self) -> String {
        sepctl::scenarios::serialize_scenario(&self.inner)
    }

    fn with_beta(&self, beta: f64) -> PyResult<Self> {
        self.inner.with_beta(beta).map(|inner| Self { inner }).map_err(to_py)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn hash(&self) -> String {
        self.inner.hash()
    }

    #[getter]
    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.family()
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(name={:?}, family={}, horizon={}, beta={})",
            self.inner.name(),
            self.inner.family(),
            self.inner.horizon(),
            self.inner.beta()
        )
    }
}

impl PyScenario {
    fn finite(&self) -> PyResult<&FiniteScenario> {
        self.inner.as_finite().map_err(to_py)
    }

    fn linear(&self) -> PyResult<&LinearGaussianScenario> {
        self.inner.as_linear().map_err(to_py)
    }
}

fn coefficients(strategy: &LinearStrategy) -> Option<(f64, f64, f64)> {
    strategy.two_step_coefficients()
}

/// Solves a scenario. Finite: `{"v0", "grid", "points_t0"}`. Linear:
/// `{"stated", "procedure", "oracle"}`, each `(a, b, c, actual_cost)`.
#[pyfunction]
#[pyo3(signature = (scenario, grid_delta=None))]
fn solve<'py>(py: Python<'py>, scenario: &PyScenario, grid_delta: Option<f64>) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    match &scenario.inner {
        sepctl::Scenario::Finite(s) => {
            let (v0, kind, points) = py
                .detach(|| {
                    let view = s.model_view();
                    let kernel = ActualKernel::exact(s);
                    let grid = match grid_delta {
                        Some(d) => BeliefGrid::simplex(&view, d)?,
                        None => BeliefGrid::reachable(&view, &kernel)?,
                    };
                    let (kind, points) = (grid.kind(), grid.len(0));
                    let (values, _) = solver::dp_solve(&view, &kernel, Arc::new(grid))?;
                    Ok((values.initial_value(), kind, points))
                })
                .map_err(to_py)?;
            out.set_item("v0", v0)?;
            out.set_item("grid", kind)?;
            out.set_item("points_t0", points)?;
        }
        sepctl::Scenario::LinearGaussian(s) => {
            let report = py.detach(|| solver::lqg_report(s)).map_err(to_py)?;
            let row = |st: &LinearStrategy, cost: f64| coefficients(st).map(|(a, b, c)| (a, b, c, cost));
            if let (Some(st), Some(c)) = (&report.stagewise.stated, report.stated_costs) {
                out.set_item("stated", row(st, c.actual))?;
            }
            out.set_item("procedure", row(&report.stagewise.procedure, report.procedure_costs.actual))?;
            out.set_item("oracle", row(&report.oracle.strategy, report.oracle.actual_cost))?;
        }
    }
    Ok(out)
}

/// Minimum penalized cost over all deterministic history strategies and the
/// index of the cheapest one.
#[pyfunction]
fn exhaustive_oracle(py: Python<'_>, scenario: &PyScenario) -> PyResult<(f64, u128)> {
    let s = scenario.finite()?;
    let r = py.detach(|| solver::exhaustive_oracle(s)).map_err(to_py)?;
    Ok((r.min_cost, r.best.index()))
}

/// Monte Carlo cost estimate. Finite scenarios run the separated DP
/// strategy; linear ones take `strategy` in `matching`, `procedure` or
/// `stated`.
#[pyfunction]
#[pyo3(signature = (scenario, rollouts, seed=0, strategy="default"))]
fn monte_carlo_cost<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    rollouts: usize,
    seed: u64,
    strategy: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let est = match &scenario.inner {
        sepctl::Scenario::Finite(s) => py.detach(|| {
            let view = s.model_view();
            let kernel = ActualKernel::exact(s);
            let grid = Arc::new(BeliefGrid::reachable(&view, &kernel)?);
            let (_, solved) = solver::dp_solve(&view, &kernel, grid)?;
            let grid_strategy = solved.as_grid()?;
            let controller = HistoryController::new("separated-dp", BeliefPolicy::new(view, &kernel, grid_strategy));
            mc(s, &controller, rollouts, seed)
        }),
        sepctl::Scenario::LinearGaussian(s) => py.detach(|| match strategy {
            "default" | "matching" => mc(s, &MatchingController::new(MatchingStrategy::exact(s)), rollouts, seed),
            "procedure" => {
                let st = solver::lqg_stagewise_solve(s)?.procedure;
                mc(s, &LinearFeedback::new("procedure", st), rollouts, seed)
            }
            "stated" => {
                let st = solver::lqg_stagewise_solve(s)?.stated.ok_or_else(|| {
                    sepctl::Error::Configuration("no stated solution for this scenario".into())
                })?;
                mc(s, &LinearFeedback::new("stated", st), rollouts, seed)
            }
            other => Err(sepctl::Error::Configuration(format!("unknown strategy {other:?}"))),
        }),
    }
    .map_err(to_py)?;
    let out = PyDict::new(py);
    out.set_item("rollouts", est.rollouts)?;
    out.set_item("actual", (est.actual.mean, est.actual.std_error))?;
    out.set_item("penalized", (est.penalized.mean, est.penalized.std_error))?;
    out.set_item("model", (est.model.mean, est.model.std_error))?;
    out.set_item("penalty", (est.penalty.mean, est.penalty.std_error))?;
    Ok(out)
}

/// Exact expected actual cost of the two-step strategy
/// `u0 = a*yhat0, u1 = b*yhat1 + c*yhat0`.
#[pyfunction]
fn two_step_cost(scenario: &PyScenario, a: f64, b: f64, c: f64) -> PyResult<f64> {
    let s = scenario.linear()?;
    solver::exact_linear_costs(s, &LinearStrategy::two_step(a, b, c))
        .map(|c| c.actual)
        .map_err(to_py)
}

/// Total variation between two mass vectors on the same support.
#[pyfunction]
fn tv_distance(p: Vec<f64>, q: Vec<f64>) -> PyResult<f64> {
    let p = Distribution::dense(p).map_err(to_py)?;
    let q = Distribution::dense(q).map_err(to_py)?;
    sepctl::tv_distance(&p, &q).map_err(to_py)
}

/// Runs the `verify` checks, writing `verify_report.csv` into `out`.
/// Returns `(passed, printed_report)`.
#[pyfunction]
#[pyo3(signature = (scenario, out, rollouts=10_000, seed=0))]
fn verify(py: Python<'_>, scenario: &str, out: PathBuf, rollouts: usize, seed: u64) -> PyResult<(bool, String)> {
    let command = Command::Verify(CommonArgs {
        scenario: scenario.to_string(),
        seed,
        rollouts,
        beta: None,
        grid_delta: None,
        smoothing_alpha: 0.0,
        out,
    });
    let mut printed = Vec::new();
    let outcome = py.detach(|| run_command(&command, &mut printed)).map_err(to_py)?;
    Ok((outcome.passed, String::from_utf8_lossy(&printed).into_owned()))
}

/// Counts of actual-observation histories per control history.
#[pyclass(name = "EmpiricalConditional")]
struct PyEmpirical {
    inner: sepctl::learner::EmpiricalConditional,
}

#[pymethods]
impl PyEmpirical {
    #[new]
    #[pyo3(signature = (n_observations, alpha=0.0))]
    fn new(n_observations: usize, alpha: f64) -> PyResult<Self> {
        sepctl::learner::EmpiricalConditional::new(n_observations, alpha)
            .map(|inner| Self { inner })
            .map_err(to_py)
    }

    /// Records every prefix of one run; `y_hats` has one more entry than `us`.
    fn record_run(&mut self, us: Vec<usize>, y_hats: Vec<usize>) -> PyResult<()> {
        self.inner.record_run(&us, &y_hats).map_err(to_py)
    }

    fn total(&self, us: Vec<usize>) -> u64 {
        self.inner.total(&us)
    }

    /// `[(y_hat_history, probability), ...]` in lexicographic order.
    fn query(&self, us: Vec<usize>) -> PyResult<Vec<(Vec<usize>, f64)>> {
        let d = self.inner.query(&us).map_err(to_py)?;
        Ok(d.iter().map(|(k, p)| (k.clone(), p)).collect())
    }

    fn to_sidecar(&self, scenario_hash: &str) -> String {
        self.inner.to_sidecar(scenario_hash)
    }
}

#[pymodule]
fn pysepctl(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("SepctlError", m.py().get_type::<SepctlError>())?;
    m.add("InsufficientDataError", m.py().get_type::<InsufficientDataError>())?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyEmpirical>()?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(exhaustive_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(monte_carlo_cost, m)?)?;
    m.add_function(wrap_pyfunction!(two_step_cost, m)?)?;
    m.add_function(wrap_pyfunction!(tv_distance, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
