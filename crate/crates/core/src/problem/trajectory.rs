use super::Plant;

/// One time step of a parallel model/actual rollout.
///
/// Disturbance, noise and control are single fields: both systems consume
/// the same realizations. The terminal record (`t = T`) has no control,
/// disturbance or penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord<P: Plant> {
    pub t: usize,
    pub x: P::State,
    pub x_hat: P::State,
    pub y: P::Observation,
    pub y_hat: P::Observation,
    pub u: Option<P::Control>,
    pub w: Option<P::Disturbance>,
    pub z: P::Noise,
    pub cost_model: f64,
    pub cost_actual: f64,
    /// `β·|x_{t+1} − x̂_{t+1}|²`.
    pub penalty: Option<f64>,
}

/// Realization of one rollout: `T + 1` records.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<P: Plant> {
    pub records: Vec<StepRecord<P>>,
}

impl<P: Plant> Trajectory<P> {
    pub fn horizon(&self) -> usize {
        self.records.len() - 1
    }

    /// Realized actual-system total: `Σ c_t(x̂_t, u_t) + c_T(x̂_T)`.
    pub fn actual_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost_actual).sum()
    }

    /// Model-side total without the discrepancy penalty.
    pub fn model_cost(&self) -> f64 {
        self.records.iter().map(|r| r.cost_model).sum()
    }

    pub fn total_penalty(&self) -> f64 {
        self.records.iter().filter_map(|r| r.penalty).sum()
    }

    /// Realized penalized total: model cost plus penalties.
    pub fn penalized_cost(&self) -> f64 {
        self.records
            .iter()
            .map(|r| r.cost_model + r.penalty.unwrap_or(0.0))
            .sum()
    }

    pub fn controls(&self) -> Vec<P::Control> {
        self.records.iter().filter_map(|r| r.u).collect()
    }

    pub fn observations(&self) -> Vec<P::Observation> {
        self.records.iter().map(|r| r.y).collect()
    }

    pub fn actual_observations(&self) -> Vec<P::Observation> {
        self.records.iter().map(|r| r.y_hat).collect()
    }
}
