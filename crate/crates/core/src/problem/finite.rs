use rand::Rng;

use super::{digest, Plant, Primitives};
use crate::distribution::Distribution;
use crate::error::{Error, Result};

/// Deterministic next-state table `next[x][u][w]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionTable {
    n_states: usize,
    n_controls: usize,
    n_disturbances: usize,
    next: Vec<usize>,
}

impl TransitionTable {
    /// `next` is laid out state-major: index `(x * |U| + u) * |W| + w`.
    pub fn new(
        n_states: usize,
        n_controls: usize,
        n_disturbances: usize,
        next: Vec<usize>,
    ) -> Result<Self> {
        if next.len() != n_states * n_controls * n_disturbances {
            return Err(Error::invariant(
                "total dynamics",
                format!(
                    "{} rows given, {} needed",
                    next.len(),
                    n_states * n_controls * n_disturbances
                ),
            ));
        }
        if let Some(bad) = next.iter().find(|&&x| x >= n_states) {
            return Err(Error::invariant(
                "domain closure",
                format!("next state {bad} outside the state space"),
            ));
        }
        Ok(Self {
            n_states,
            n_controls,
            n_disturbances,
            next,
        })
    }

    pub fn from_fn(
        n_states: usize,
        n_controls: usize,
        n_disturbances: usize,
        f: impl Fn(usize, usize, usize) -> usize,
    ) -> Result<Self> {
        let mut next = Vec::with_capacity(n_states * n_controls * n_disturbances);
        for x in 0..n_states {
            for u in 0..n_controls {
                for w in 0..n_disturbances {
                    next.push(f(x, u, w));
                }
            }
        }
        Self::new(n_states, n_controls, n_disturbances, next)
    }

    #[inline]
    pub fn get(&self, x: usize, u: usize, w: usize) -> usize {
        self.next[(x * self.n_controls + u) * self.n_disturbances + w]
    }

    /// Number of `(x, u, w)` entries on which two tables disagree.
    pub fn differences(&self, other: &TransitionTable) -> usize {
        self.next
            .iter()
            .zip(&other.next)
            .filter(|(a, b)| a != b)
            .count()
    }
}

/// Everything needed to build a [`FiniteScenario`]; validated by
/// [`FiniteScenario::new`].
#[derive(Debug, Clone)]
pub struct FiniteParts {
    pub name: String,
    pub horizon: usize,
    pub beta: f64,
    pub states: Vec<String>,
    /// Numeric value of each state, used by the discrepancy penalty.
    pub state_values: Vec<f64>,
    pub controls: Vec<String>,
    pub observations: Vec<String>,
    pub disturbances: Vec<String>,
    pub noises: Vec<String>,
    pub initial: Distribution<usize>,
    /// One law per decision step `0..T`.
    pub disturbance_law: Vec<Distribution<usize>>,
    /// One law per observation time `0..=T`.
    pub noise_law: Vec<Distribution<usize>>,
    pub model: TransitionTable,
    pub actual: TransitionTable,
    /// `observation[x * |Z| + z]`.
    pub observation: Vec<usize>,
    /// `stage_cost[x * |U| + u]`.
    pub stage_cost: Vec<f64>,
    pub terminal_cost: Vec<f64>,
}

/// Finite-support scenario with tabular dynamics, observation map and costs.
///
/// Tables are time-invariant; the disturbance and noise laws may change
/// with `t`. The initial state of the actual system equals the model's.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteScenario {
    name: String,
    horizon: usize,
    beta: f64,
    states: Vec<String>,
    state_values: Vec<f64>,
    controls: Vec<String>,
    observations: Vec<String>,
    disturbances: Vec<String>,
    noises: Vec<String>,
    initial: Distribution<usize>,
    disturbance_law: Vec<Distribution<usize>>,
    noise_law: Vec<Distribution<usize>>,
    model: TransitionTable,
    actual: TransitionTable,
    observation: Vec<usize>,
    stage_cost: Vec<f64>,
    terminal_cost: Vec<f64>,
    hash: String,
}

fn check_labels(what: &'static str, labels: &[String]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invariant("nonempty space", format!("{what} is empty")));
    }
    for (i, l) in labels.iter().enumerate() {
        if l.is_empty() || l.contains([',', '=', ':', '>', '#', '[', ']']) || l.contains(char::is_whitespace) {
            return Err(Error::invariant(
                "label syntax",
                format!("{what} label {l:?} is empty or contains reserved characters"),
            ));
        }
        if labels[..i].contains(l) {
            return Err(Error::invariant(
                "unique labels",
                format!("{what} label {l:?} appears twice"),
            ));
        }
    }
    Ok(())
}

fn check_law(what: &str, law: &Distribution<usize>, n: usize) -> Result<()> {
    if law.len() != n || law.support().iter().enumerate().any(|(i, &k)| i != k) {
        return Err(Error::invariant(
            "law support",
            format!("{what} must be a dense law over {n} outcomes"),
        ));
    }
    Ok(())
}

impl FiniteScenario {
    pub fn new(parts: FiniteParts) -> Result<Self> {
        let FiniteParts {
            name,
            horizon,
            beta,
            states,
            state_values,
            controls,
            observations,
            disturbances,
            noises,
            initial,
            disturbance_law,
            noise_law,
            model,
            actual,
            observation,
            stage_cost,
            terminal_cost,
        } = parts;
        if horizon == 0 {
            return Err(Error::invariant("horizon", "horizon must be at least 1"));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invariant("beta", format!("beta={beta} must be >= 0")));
        }
        check_labels("state", &states)?;
        check_labels("control", &controls)?;
        check_labels("observation", &observations)?;
        check_labels("disturbance", &disturbances)?;
        check_labels("noise", &noises)?;
        let (nx, nu, ny, nw, nz) = (
            states.len(),
            controls.len(),
            observations.len(),
            disturbances.len(),
            noises.len(),
        );
        if state_values.len() != nx || state_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invariant(
                "state values",
                "one finite value per state is required",
            ));
        }
        check_law("initial law", &initial, nx)?;
        if disturbance_law.len() != horizon {
            return Err(Error::invariant(
                "disturbance law",
                format!("{} laws given for horizon {horizon}", disturbance_law.len()),
            ));
        }
        for (t, law) in disturbance_law.iter().enumerate() {
            check_law(&format!("disturbance law at t={t}"), law, nw)?;
        }
        if noise_law.len() != horizon + 1 {
            return Err(Error::invariant(
                "noise law",
                format!("{} laws given, {} needed", noise_law.len(), horizon + 1),
            ));
        }
        for (t, law) in noise_law.iter().enumerate() {
            check_law(&format!("noise law at t={t}"), law, nz)?;
        }
        for (label, table) in [("model", &model), ("actual", &actual)] {
            if (table.n_states, table.n_controls, table.n_disturbances) != (nx, nu, nw) {
                return Err(Error::invariant(
                    "shared spaces",
                    format!("{label} dynamics table has the wrong shape"),
                ));
            }
        }
        if observation.len() != nx * nz || observation.iter().any(|&y| y >= ny) {
            return Err(Error::invariant(
                "observation map",
                "observation table must map every (state, noise) to an observation",
            ));
        }
        if stage_cost.len() != nx * nu || stage_cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::invariant(
                "stage cost",
                "one finite stage cost per (state, control) is required",
            ));
        }
        if terminal_cost.len() != nx || terminal_cost.iter().any(|c| !c.is_finite()) {
            return Err(Error::invariant(
                "terminal cost",
                "one finite terminal cost per state is required",
            ));
        }
        let mut scenario = Self {
            name,
            horizon,
            beta,
            states,
            state_values,
            controls,
            observations,
            disturbances,
            noises,
            initial,
            disturbance_law,
            noise_law,
            model,
            actual,
            observation,
            stage_cost,
            terminal_cost,
            hash: String::new(),
        };
        scenario.hash = digest(&crate::scenarios::serialize_finite(&scenario));
        Ok(scenario)
    }

    pub fn parts(&self) -> FiniteParts {
        FiniteParts {
            name: self.name.clone(),
            horizon: self.horizon,
            beta: self.beta,
            states: self.states.clone(),
            state_values: self.state_values.clone(),
            controls: self.controls.clone(),
            observations: self.observations.clone(),
            disturbances: self.disturbances.clone(),
            noises: self.noises.clone(),
            initial: self.initial.clone(),
            disturbance_law: self.disturbance_law.clone(),
            noise_law: self.noise_law.clone(),
            model: self.model.clone(),
            actual: self.actual.clone(),
            observation: self.observation.clone(),
            stage_cost: self.stage_cost.clone(),
            terminal_cost: self.terminal_cost.clone(),
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(FiniteParts {
            beta,
            ..self.parts()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn state_values(&self) -> &[f64] {
        &self.state_values
    }

    pub fn controls(&self) -> &[String] {
        &self.controls
    }

    pub fn observations(&self) -> &[String] {
        &self.observations
    }

    pub fn disturbances(&self) -> &[String] {
        &self.disturbances
    }

    pub fn noises(&self) -> &[String] {
        &self.noises
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_controls(&self) -> usize {
        self.controls.len()
    }

    pub fn n_observations(&self) -> usize {
        self.observations.len()
    }

    pub fn initial(&self) -> &Distribution<usize> {
        &self.initial
    }

    pub fn disturbance_law(&self, t: usize) -> &Distribution<usize> {
        &self.disturbance_law[t]
    }

    pub fn noise_law(&self, t: usize) -> &Distribution<usize> {
        &self.noise_law[t]
    }

    pub fn model_table(&self) -> &TransitionTable {
        &self.model
    }

    /// The actual dynamics table. Only harness and verification code reads
    /// this; solvers receive an [`ActualKernel`] instead.
    pub fn actual_table(&self) -> &TransitionTable {
        &self.actual
    }

    pub fn observation_of(&self, x: usize, z: usize) -> usize {
        self.observation[x * self.noises.len() + z]
    }

    pub fn stage_cost_of(&self, x: usize, u: usize) -> f64 {
        self.stage_cost[x * self.controls.len() + u]
    }

    pub fn terminal_cost_of(&self, x: usize) -> f64 {
        self.terminal_cost[x]
    }

    /// Solver-facing view without the actual dynamics.
    pub fn model_view(&self) -> ModelView<'_> {
        ModelView { scenario: self }
    }

    pub fn state_index(&self, label: &str) -> Option<usize> {
        self.states.iter().position(|s| s == label)
    }

    pub fn control_index(&self, label: &str) -> Option<usize> {
        self.controls.iter().position(|s| s == label)
    }

    pub fn observation_index(&self, label: &str) -> Option<usize> {
        self.observations.iter().position(|s| s == label)
    }

    fn check_index(&self, what: &str, i: usize, n: usize) -> Result<()> {
        if i < n {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} index {i} outside 0..{n}")))
        }
    }

    fn check_step(&self, t: usize, x: usize, u: usize, w: usize) -> Result<()> {
        if t >= self.horizon {
            return Err(Error::Domain(format!("step at t={t} needs t < T={}", self.horizon)));
        }
        self.check_index("state", x, self.states.len())?;
        self.check_index("control", u, self.controls.len())?;
        self.check_index("disturbance", w, self.disturbances.len())
    }
}

impl Plant for FiniteScenario {
    type State = usize;
    type Control = usize;
    type Disturbance = usize;
    type Noise = usize;
    type Observation = usize;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn scenario_hash(&self) -> String {
        self.hash.clone()
    }

    fn draw_primitives<R: Rng + ?Sized>(&self, rng: &mut R) -> Primitives<usize, usize, usize> {
        let x0 = self.initial.sample_index(rng.random());
        let w = self
            .disturbance_law
            .iter()
            .map(|law| law.sample_index(rng.random()))
            .collect();
        let z = self
            .noise_law
            .iter()
            .map(|law| law.sample_index(rng.random()))
            .collect();
        Primitives { x0, w, z }
    }

    fn step_model(&self, t: usize, x: usize, u: usize, w: usize) -> Result<usize> {
        self.check_step(t, x, u, w)?;
        Ok(self.model.get(x, u, w))
    }

    fn step_actual(&self, t: usize, x_hat: usize, u: usize, w: usize) -> Result<usize> {
        self.check_step(t, x_hat, u, w)?;
        Ok(self.actual.get(x_hat, u, w))
    }

    fn observe(&self, t: usize, x: usize, z: usize) -> Result<usize> {
        if t > self.horizon {
            return Err(Error::Domain(format!("observation at t={t} beyond horizon")));
        }
        self.check_index("state", x, self.states.len())?;
        self.check_index("noise", z, self.noises.len())?;
        Ok(self.observation_of(x, z))
    }

    fn stage_cost(&self, t: usize, x: usize, u: usize) -> Result<f64> {
        if t >= self.horizon {
            return Err(Error::Domain(format!("stage cost at t={t} needs t < T")));
        }
        self.check_index("state", x, self.states.len())?;
        self.check_index("control", u, self.controls.len())?;
        Ok(self.stage_cost_of(x, u))
    }

    fn terminal_cost(&self, x: usize) -> Result<f64> {
        self.check_index("state", x, self.states.len())?;
        Ok(self.terminal_cost[x])
    }

    fn discrepancy(&self, x: usize, x_hat: usize) -> f64 {
        let d = self.state_values[x] - self.state_values[x_hat];
        d * d
    }

    fn check_control(&self, _t: usize, u: usize) -> Result<()> {
        self.check_index("control", u, self.controls.len())
    }

    fn state_label(&self, x: usize) -> String {
        self.states[x].clone()
    }

    fn control_label(&self, u: usize) -> String {
        self.controls[u].clone()
    }

    fn disturbance_label(&self, w: usize) -> String {
        self.disturbances[w].clone()
    }

    fn noise_label(&self, z: usize) -> String {
        self.noises[z].clone()
    }

    fn observation_label(&self, y: usize) -> String {
        self.observations[y].clone()
    }
}

/// What the offline solver may see of a finite scenario: everything except
/// the actual dynamics.
#[derive(Debug, Clone, Copy)]
pub struct ModelView<'a> {
    scenario: &'a FiniteScenario,
}

impl<'a> ModelView<'a> {
    /// View of a loaded scenario; Gaussian scenarios have no tabular view.
    pub fn of(scenario: &'a super::Scenario) -> Result<Self> {
        Ok(scenario.as_finite()?.model_view())
    }

    pub fn horizon(&self) -> usize {
        self.scenario.horizon
    }

    pub fn beta(&self) -> f64 {
        self.scenario.beta
    }

    pub fn scenario_hash(&self) -> String {
        self.scenario.hash.clone()
    }

    pub fn n_states(&self) -> usize {
        self.scenario.states.len()
    }

    pub fn n_controls(&self) -> usize {
        self.scenario.controls.len()
    }

    pub fn n_observations(&self) -> usize {
        self.scenario.observations.len()
    }

    pub fn n_disturbances(&self) -> usize {
        self.scenario.disturbances.len()
    }

    pub fn n_noises(&self) -> usize {
        self.scenario.noises.len()
    }

    pub fn state_value(&self, x: usize) -> f64 {
        self.scenario.state_values[x]
    }

    pub fn initial(&self) -> &'a Distribution<usize> {
        &self.scenario.initial
    }

    pub fn disturbance_law(&self, t: usize) -> &'a Distribution<usize> {
        &self.scenario.disturbance_law[t]
    }

    pub fn noise_law(&self, t: usize) -> &'a Distribution<usize> {
        &self.scenario.noise_law[t]
    }

    pub fn model_next(&self, x: usize, u: usize, w: usize) -> usize {
        self.scenario.model.get(x, u, w)
    }

    pub fn observation_of(&self, x: usize, z: usize) -> usize {
        self.scenario.observation_of(x, z)
    }

    pub fn stage_cost(&self, x: usize, u: usize) -> f64 {
        self.scenario.stage_cost_of(x, u)
    }

    pub fn terminal_cost(&self, x: usize) -> f64 {
        self.scenario.terminal_cost[x]
    }

    pub fn observation_label(&self, y: usize) -> &'a str {
        &self.scenario.observations[y]
    }

    pub fn discrepancy(&self, x: usize, x_hat: usize) -> f64 {
        let d = self.scenario.state_values[x] - self.scenario.state_values[x_hat];
        d * d
    }
}

/// Transition kernel of the actual system, `p(x̂' | x̂, u, w)`.
///
/// The controller never knows the actual dynamics; it is handed either the
/// exact kernel (verification) or an estimate learned from parallel runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ActualKernel {
    n_states: usize,
    n_controls: usize,
    n_disturbances: usize,
    probs: Vec<f64>,
}

impl ActualKernel {
    /// Deterministic kernel read off the scenario's actual table.
    pub fn exact(scenario: &FiniteScenario) -> Self {
        let (n, nu, nw) = (
            scenario.n_states(),
            scenario.n_controls(),
            scenario.disturbances.len(),
        );
        let mut probs = vec![0.0; n * nu * nw * n];
        for xh in 0..n {
            for u in 0..nu {
                for w in 0..nw {
                    let next = scenario.actual.get(xh, u, w);
                    probs[((xh * nu + u) * nw + w) * n + next] = 1.0;
                }
            }
        }
        Self {
            n_states: n,
            n_controls: nu,
            n_disturbances: nw,
            probs,
        }
    }

    /// Kernel from rows laid out like [`ActualKernel::row`]; each row must
    /// be a probability vector.
    pub fn from_rows(
        n_states: usize,
        n_controls: usize,
        n_disturbances: usize,
        probs: Vec<f64>,
    ) -> Result<Self> {
        if probs.len() != n_states * n_controls * n_disturbances * n_states {
            return Err(Error::invariant("kernel shape", "wrong number of entries"));
        }
        for row in probs.chunks(n_states) {
            let total: f64 = row.iter().sum();
            if row.iter().any(|p| *p < 0.0 || !p.is_finite())
                || (total - 1.0).abs() > crate::distribution::MASS_TOLERANCE
            {
                return Err(Error::invariant(
                    "normalization",
                    format!("kernel row sums to {total}"),
                ));
            }
        }
        Ok(Self {
            n_states,
            n_controls,
            n_disturbances,
            probs,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// `p(· | x̂, u, w)` as a slice over next states.
    #[inline]
    pub fn row(&self, x_hat: usize, u: usize, w: usize) -> &[f64] {
        let start = ((x_hat * self.n_controls + u) * self.n_disturbances + w) * self.n_states;
        &self.probs[start..start + self.n_states]
    }

    pub fn matches(&self, view: &ModelView<'_>) -> bool {
        self.n_states == view.n_states()
            && self.n_controls == view.n_controls()
            && self.n_disturbances == view.n_disturbances()
    }
}
