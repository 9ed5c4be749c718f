use rand::Rng;
use rand_distr::StandardNormal;

use super::{digest, Plant, Primitives};
use crate::distribution::Gaussian1D;
use crate::error::{Error, Result};

/// `x' = state·x + control·u + disturbance·w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStep {
    pub state: f64,
    pub control: f64,
    pub disturbance: f64,
}

impl LinearStep {
    pub const fn new(state: f64, control: f64, disturbance: f64) -> Self {
        Self {
            state,
            control,
            disturbance,
        }
    }

    #[inline]
    pub fn apply(&self, x: f64, u: f64, w: f64) -> f64 {
        self.state * x + self.control * u + self.disturbance * w
    }
}

/// `y = state·x + noise·z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearObservation {
    pub state: f64,
    pub noise: f64,
}

impl LinearObservation {
    pub const IDENTITY: Self = Self {
        state: 1.0,
        noise: 0.0,
    };
}

/// `q·x² + r·u²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticCost {
    pub state: f64,
    pub control: f64,
}

#[derive(Debug, Clone)]
pub struct LinearParts {
    pub name: String,
    pub horizon: usize,
    pub beta: f64,
    pub model: Vec<LinearStep>,
    pub actual: Vec<LinearStep>,
    /// One map per observation time `0..=T`.
    pub observation: Vec<LinearObservation>,
    pub stage_cost: Vec<QuadraticCost>,
    pub terminal_cost: f64,
    pub initial: Gaussian1D,
    pub disturbance: Vec<Gaussian1D>,
    pub noise: Vec<Gaussian1D>,
    /// Cov(X₀, W₀); every other pair of primitives is independent.
    pub initial_disturbance_covariance: f64,
    /// Closed control interval, `None` for the whole real line.
    pub control_bounds: Option<(f64, f64)>,
}

/// Scalar linear system with Gaussian primitives and quadratic costs.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearGaussianScenario {
    name: String,
    horizon: usize,
    beta: f64,
    model: Vec<LinearStep>,
    actual: Vec<LinearStep>,
    observation: Vec<LinearObservation>,
    stage_cost: Vec<QuadraticCost>,
    terminal_cost: f64,
    initial: Gaussian1D,
    disturbance: Vec<Gaussian1D>,
    noise: Vec<Gaussian1D>,
    covariance: f64,
    control_bounds: Option<(f64, f64)>,
    hash: String,
}

fn finite_all(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

impl LinearGaussianScenario {
    pub fn new(parts: LinearParts) -> Result<Self> {
        let LinearParts {
            name,
            horizon,
            beta,
            model,
            actual,
            observation,
            stage_cost,
            terminal_cost,
            initial,
            disturbance,
            noise,
            initial_disturbance_covariance: covariance,
            control_bounds,
        } = parts;
        if horizon == 0 {
            return Err(Error::invariant("horizon", "horizon must be at least 1"));
        }
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::invariant("beta", format!("beta={beta} must be >= 0")));
        }
        let per_step = [
            ("model coefficients", model.len(), horizon),
            ("actual coefficients", actual.len(), horizon),
            ("observation maps", observation.len(), horizon + 1),
            ("stage costs", stage_cost.len(), horizon),
            ("disturbance laws", disturbance.len(), horizon),
            ("noise laws", noise.len(), horizon + 1),
        ];
        for (what, got, want) in per_step {
            if got != want {
                return Err(Error::invariant(
                    "per-step tables",
                    format!("{got} {what} given, {want} needed"),
                ));
            }
        }
        for s in model.iter().chain(&actual) {
            if !finite_all(&[s.state, s.control, s.disturbance]) {
                return Err(Error::invariant("total dynamics", "non-finite coefficient"));
            }
        }
        for o in &observation {
            if !finite_all(&[o.state, o.noise]) {
                return Err(Error::invariant("observation map", "non-finite coefficient"));
            }
        }
        for c in &stage_cost {
            if !finite_all(&[c.state, c.control]) {
                return Err(Error::invariant("stage cost", "non-finite weight"));
            }
        }
        if !terminal_cost.is_finite() {
            return Err(Error::invariant("terminal cost", "non-finite weight"));
        }
        let var_w0 = disturbance[0].variance();
        if !covariance.is_finite() || covariance * covariance > initial.variance() * var_w0 + 1e-12 {
            return Err(Error::invariant(
                "covariance",
                format!(
                    "Cov(X0, W0)={covariance} inconsistent with variances {} and {var_w0}",
                    initial.variance()
                ),
            ));
        }
        if let Some((lo, hi)) = control_bounds {
            if !(lo <= hi) {
                return Err(Error::invariant("control interval", format!("[{lo}, {hi}] is empty")));
            }
        }
        let mut scenario = Self {
            name,
            horizon,
            beta,
            model,
            actual,
            observation,
            stage_cost,
            terminal_cost,
            initial,
            disturbance,
            noise,
            covariance,
            control_bounds,
            hash: String::new(),
        };
        scenario.hash = digest(&crate::scenarios::serialize_linear(&scenario));
        Ok(scenario)
    }

    pub fn parts(&self) -> LinearParts {
        LinearParts {
            name: self.name.clone(),
            horizon: self.horizon,
            beta: self.beta,
            model: self.model.clone(),
            actual: self.actual.clone(),
            observation: self.observation.clone(),
            stage_cost: self.stage_cost.clone(),
            terminal_cost: self.terminal_cost,
            initial: self.initial,
            disturbance: self.disturbance.clone(),
            noise: self.noise.clone(),
            initial_disturbance_covariance: self.covariance,
            control_bounds: self.control_bounds,
        }
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(LinearParts {
            beta,
            ..self.parts()
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn model_step(&self, t: usize) -> LinearStep {
        self.model[t]
    }

    /// Actual-system coefficients; harness and analysis code only.
    pub fn actual_step(&self, t: usize) -> LinearStep {
        self.actual[t]
    }

    pub fn observation_map(&self, t: usize) -> LinearObservation {
        self.observation[t]
    }

    pub fn stage_weights(&self, t: usize) -> QuadraticCost {
        self.stage_cost[t]
    }

    pub fn terminal_weight(&self) -> f64 {
        self.terminal_cost
    }

    pub fn initial(&self) -> Gaussian1D {
        self.initial
    }

    pub fn disturbance(&self, t: usize) -> Gaussian1D {
        self.disturbance[t]
    }

    pub fn noise(&self, t: usize) -> Gaussian1D {
        self.noise[t]
    }

    pub fn initial_disturbance_covariance(&self) -> f64 {
        self.covariance
    }

    pub fn control_bounds(&self) -> Option<(f64, f64)> {
        self.control_bounds
    }

    fn check_t(&self, t: usize) -> Result<()> {
        if t < self.horizon {
            Ok(())
        } else {
            Err(Error::Domain(format!("step at t={t} needs t < T={}", self.horizon)))
        }
    }

    fn check_real(what: &str, v: f64) -> Result<()> {
        if v.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("{what} {v} is not a finite real")))
        }
    }
}

fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, variance: f64) -> f64 {
    let n: f64 = rng.sample(StandardNormal);
    mean + variance.sqrt() * n
}

impl Plant for LinearGaussianScenario {
    type State = f64;
    type Control = f64;
    type Disturbance = f64;
    type Noise = f64;
    type Observation = f64;

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn beta(&self) -> f64 {
        self.beta
    }

    fn scenario_hash(&self) -> String {
        self.hash.clone()
    }

    /// X₀ first, then W₀ | X₀ from the Gaussian conditional that reproduces
    /// the declared covariance; the rest independently.
    fn draw_primitives<R: Rng + ?Sized>(&self, rng: &mut R) -> Primitives<f64, f64, f64> {
        let x0 = normal(rng, self.initial.mean(), self.initial.variance());
        let mut w = Vec::with_capacity(self.horizon);
        for (t, law) in self.disturbance.iter().enumerate() {
            let draw = if t == 0 && self.initial.variance() > 0.0 {
                let slope = self.covariance / self.initial.variance();
                let mean = law.mean() + slope * (x0 - self.initial.mean());
                let variance = (law.variance() - self.covariance * slope).max(0.0);
                normal(rng, mean, variance)
            } else {
                normal(rng, law.mean(), law.variance())
            };
            w.push(draw);
        }
        let z = self
            .noise
            .iter()
            .map(|law| normal(rng, law.mean(), law.variance()))
            .collect();
        Primitives { x0, w, z }
    }

    fn step_model(&self, t: usize, x: f64, u: f64, w: f64) -> Result<f64> {
        self.check_t(t)?;
        Self::check_real("state", x)?;
        Self::check_real("control", u)?;
        Self::check_real("disturbance", w)?;
        Ok(self.model[t].apply(x, u, w))
    }

    fn step_actual(&self, t: usize, x_hat: f64, u: f64, w: f64) -> Result<f64> {
        self.check_t(t)?;
        Self::check_real("state", x_hat)?;
        Self::check_real("control", u)?;
        Self::check_real("disturbance", w)?;
        Ok(self.actual[t].apply(x_hat, u, w))
    }

    fn observe(&self, t: usize, x: f64, z: f64) -> Result<f64> {
        if t > self.horizon {
            return Err(Error::Domain(format!("observation at t={t} beyond horizon")));
        }
        Self::check_real("state", x)?;
        Self::check_real("noise", z)?;
        let map = self.observation[t];
        Ok(map.state * x + map.noise * z)
    }

    fn stage_cost(&self, t: usize, x: f64, u: f64) -> Result<f64> {
        self.check_t(t)?;
        let c = self.stage_cost[t];
        Ok(c.state * x * x + c.control * u * u)
    }

    fn terminal_cost(&self, x: f64) -> Result<f64> {
        Self::check_real("state", x)?;
        Ok(self.terminal_cost * x * x)
    }

    fn discrepancy(&self, x: f64, x_hat: f64) -> f64 {
        (x - x_hat) * (x - x_hat)
    }

    fn check_control(&self, t: usize, u: f64) -> Result<()> {
        Self::check_real("control", u)?;
        if let Some((lo, hi)) = self.control_bounds {
            if u < lo || u > hi {
                return Err(Error::Domain(format!(
                    "control {u} at t={t} outside [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }

    fn state_label(&self, x: f64) -> String {
        x.to_string()
    }

    fn control_label(&self, u: f64) -> String {
        u.to_string()
    }

    fn disturbance_label(&self, w: f64) -> String {
        w.to_string()
    }

    fn noise_label(&self, z: f64) -> String {
        z.to_string()
    }

    fn observation_label(&self, y: f64) -> String {
        y.to_string()
    }
}
