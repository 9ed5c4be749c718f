//! Problem instances: spaces, model and actual dynamics, the shared
//! observation map, costs, and the law of the primitive random variables.
//!
//! Two families exist. [`FiniteScenario`] has finite labeled spaces and
//! tabular laws; [`LinearGaussianScenario`] is scalar, linear, with Gaussian
//! primitives. Both implement [`Plant`], which is all the rollout harness
//! needs.

mod finite;
mod linear;
mod trajectory;

use std::fmt::Debug;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub use finite::{ActualKernel, FiniteParts, FiniteScenario, ModelView, TransitionTable};
pub use linear::{
    LinearGaussianScenario, LinearObservation, LinearParts, LinearStep, QuadraticCost,
};
pub use trajectory::{StepRecord, Trajectory};

/// One realization of the primitive random variables: the initial state,
/// one disturbance per decision step, and one sensor noise per observation
/// time `0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitives<S, W, Z> {
    pub x0: S,
    pub w: Vec<W>,
    pub z: Vec<Z>,
}

/// A model/actual system pair driven by shared primitives.
///
/// `step_actual` is here because the rollout harness has to run the actual
/// system; solver and filter code never take a `Plant`, they take a
/// [`ModelView`] plus an explicit actual-transition kernel.
pub trait Plant: Sync {
    type State: Copy + PartialEq + Debug + Send + Sync;
    type Control: Copy + PartialEq + Debug + Send + Sync;
    type Disturbance: Copy + PartialEq + Debug + Send + Sync;
    type Noise: Copy + PartialEq + Debug + Send + Sync;
    type Observation: Copy + PartialEq + Debug + Send + Sync;

    fn horizon(&self) -> usize;
    fn beta(&self) -> f64;
    fn scenario_hash(&self) -> String;

    fn draw_primitives<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
    ) -> Primitives<Self::State, Self::Disturbance, Self::Noise>;

    fn step_model(
        &self,
        t: usize,
        x: Self::State,
        u: Self::Control,
        w: Self::Disturbance,
    ) -> Result<Self::State>;

    fn step_actual(
        &self,
        t: usize,
        x_hat: Self::State,
        u: Self::Control,
        w: Self::Disturbance,
    ) -> Result<Self::State>;

    fn observe(&self, t: usize, x: Self::State, z: Self::Noise) -> Result<Self::Observation>;

    fn stage_cost(&self, t: usize, x: Self::State, u: Self::Control) -> Result<f64>;

    fn terminal_cost(&self, x: Self::State) -> Result<f64>;

    /// Squared distance `|x − x̂|²` used by the discrepancy penalty.
    fn discrepancy(&self, x: Self::State, x_hat: Self::State) -> f64;

    fn check_control(&self, t: usize, u: Self::Control) -> Result<()>;

    fn state_label(&self, x: Self::State) -> String;
    fn control_label(&self, u: Self::Control) -> String;
    fn disturbance_label(&self, w: Self::Disturbance) -> String;
    fn noise_label(&self, z: Self::Noise) -> String;
    fn observation_label(&self, y: Self::Observation) -> String;

    /// `c_t(x, u)` for `t < T`, `c_T(x)` at `t = T`. The control must be
    /// present exactly when `t < T`.
    fn cost(&self, t: usize, x: Self::State, u: Option<Self::Control>) -> Result<f64> {
        let horizon = self.horizon();
        match (t.cmp(&horizon), u) {
            (std::cmp::Ordering::Less, Some(u)) => self.stage_cost(t, x, u),
            (std::cmp::Ordering::Less, None) => Err(Error::Domain(format!(
                "stage cost at t={t} needs a control"
            ))),
            (std::cmp::Ordering::Equal, None) => self.terminal_cost(x),
            (std::cmp::Ordering::Equal, Some(_)) => Err(Error::Domain(format!(
                "control supplied to the terminal cost at t={t}"
            ))),
            (std::cmp::Ordering::Greater, _) => Err(Error::Domain(format!(
                "t={t} beyond horizon {horizon}"
            ))),
        }
    }

    /// `c_t(x, u) + β·|x_next − x̂_next|²`.
    fn penalized_stage_cost(
        &self,
        t: usize,
        x: Self::State,
        u: Self::Control,
        x_next: Self::State,
        x_hat_next: Self::State,
    ) -> Result<f64> {
        if t >= self.horizon() {
            return Err(Error::Domain(format!(
                "penalized stage cost needs t < T, got t={t}"
            )));
        }
        Ok(self.stage_cost(t, x, u)? + self.beta() * self.discrepancy(x_next, x_hat_next))
    }
}

/// RNG for stream `stream` of master seed `seed`.
///
/// Each rollout gets its own ChaCha stream, so rollouts can run in any order
/// or concurrently and still reproduce bit for bit.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Deterministic primitive draw for `seed`.
pub fn sample_primitives<P: Plant>(
    plant: &P,
    seed: u64,
) -> Primitives<P::State, P::Disturbance, P::Noise> {
    plant.draw_primitives(&mut stream_rng(seed, 0))
}

/// Either scenario family, as loaded from a file or picked by name.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Finite(FiniteScenario),
    LinearGaussian(LinearGaussianScenario),
}

impl Scenario {
    pub fn name(&self) -> &str {
        match self {
            Scenario::Finite(s) => s.name(),
            Scenario::LinearGaussian(s) => s.name(),
        }
    }

    pub fn horizon(&self) -> usize {
        match self {
            Scenario::Finite(s) => s.horizon(),
            Scenario::LinearGaussian(s) => s.horizon(),
        }
    }

    pub fn beta(&self) -> f64 {
        match self {
            Scenario::Finite(s) => s.beta(),
            Scenario::LinearGaussian(s) => s.beta(),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            Scenario::Finite(_) => "finite",
            Scenario::LinearGaussian(_) => "linear_gaussian",
        }
    }

    /// Copy of the scenario with a different penalty weight.
    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Ok(match self {
            Scenario::Finite(s) => Scenario::Finite(s.with_beta(beta)?),
            Scenario::LinearGaussian(s) => Scenario::LinearGaussian(s.with_beta(beta)?),
        })
    }

    pub fn hash(&self) -> String {
        match self {
            Scenario::Finite(s) => s.scenario_hash(),
            Scenario::LinearGaussian(s) => s.scenario_hash(),
        }
    }

    pub fn as_finite(&self) -> Result<&FiniteScenario> {
        match self {
            Scenario::Finite(s) => Ok(s),
            Scenario::LinearGaussian(_) => Err(Error::UnsupportedRepresentation(
                "operation needs a finite-support scenario".into(),
            )),
        }
    }

    pub fn as_linear(&self) -> Result<&LinearGaussianScenario> {
        match self {
            Scenario::LinearGaussian(s) => Ok(s),
            Scenario::Finite(_) => Err(Error::UnsupportedRepresentation(
                "operation needs a scalar linear-Gaussian scenario".into(),
            )),
        }
    }
}

impl From<FiniteScenario> for Scenario {
    fn from(s: FiniteScenario) -> Self {
        Scenario::Finite(s)
    }
}

impl From<LinearGaussianScenario> for Scenario {
    fn from(s: LinearGaussianScenario) -> Self {
        Scenario::LinearGaussian(s)
    }
}

/// Short stable digest of a canonical scenario text.
pub(crate) fn digest(text: &str) -> String {
    use sha2::{Digest, Sha256};
    let bytes = Sha256::digest(text.as_bytes());
    bytes[..8].iter().map(|b| format!("{b:02x}")).collect()
}
