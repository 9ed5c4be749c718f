use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::filter::{self, InformationState};
use crate::problem::{ActualKernel, ModelView};

/// Tolerance under which two reachable beliefs are merged.
pub const EXACT_TOLERANCE: f64 = 1e-9;

/// Lattices larger than this are refused.
pub const SIMPLEX_LIMIT: usize = 2_000_000;

#[derive(Debug, Clone, PartialEq)]
enum Points {
    /// One list of beliefs per time step.
    Exact(Vec<Vec<InformationState>>),
    /// One lattice shared by every step; masses are multiples of `1/N`.
    Simplex {
        resolution: usize,
        points: Vec<InformationState>,
        lookup: HashMap<Vec<u32>, usize>,
    },
}

/// Finite set of representative information states with a nearest-point
/// projection in L1.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefGrid {
    n_states: usize,
    horizon: usize,
    delta: f64,
    points: Points,
}

/// Outcome of projecting a belief onto the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub index: usize,
    pub distance: f64,
}

impl BeliefGrid {
    /// Every belief reachable from some first observation under some control
    /// sequence, found by breadth-first expansion of [`filter::phi_update`].
    pub fn reachable(view: &ModelView<'_>, kernel: &ActualKernel) -> Result<Self> {
        let horizon = view.horizon();
        let mut layers: Vec<Vec<InformationState>> = Vec::with_capacity(horizon + 1);
        let mut first = Vec::new();
        for y in 0..view.n_observations() {
            match filter::initial_information_state(view, y) {
                Ok(pi) => insert_unique(&mut first, pi),
                Err(Error::ImpossibleObservation { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        layers.push(first);
        for t in 0..horizon {
            let mut next = Vec::new();
            for pi in &layers[t] {
                for u in 0..view.n_controls() {
                    let predictive = filter::predictive_observation_probs(view, kernel, pi, u)?;
                    for (y, p) in predictive.iter().enumerate() {
                        if *p > 0.0 {
                            insert_unique(&mut next, filter::phi_update(view, kernel, pi, y, u)?);
                        }
                    }
                }
            }
            layers.push(next);
        }
        Ok(Self {
            n_states: view.n_states(),
            horizon,
            delta: EXACT_TOLERANCE,
            points: Points::Exact(layers),
        })
    }

    /// Uniform lattice on the joint simplex with resolution `delta`: masses
    /// are multiples of `1/N` with `N = ceil(n² / delta)`, which keeps every
    /// belief within `delta` of a lattice point.
    pub fn simplex(view: &ModelView<'_>, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(Error::Configuration(format!(
                "grid resolution must be positive, got {delta}"
            )));
        }
        let n = view.n_states();
        let dim = n * n;
        let resolution = (dim as f64 / delta).ceil() as usize;
        let count = lattice_size(resolution, dim);
        if count > SIMPLEX_LIMIT as u128 {
            return Err(Error::TooLarge {
                count,
                limit: SIMPLEX_LIMIT as u128,
            });
        }
        let mut points = Vec::with_capacity(count as usize);
        let mut lookup = HashMap::with_capacity(count as usize);
        let mut counts = vec![0u32; dim];
        compositions(resolution as u32, 0, &mut counts, &mut |c| {
            let joint = c.iter().map(|&k| k as f64 / resolution as f64).collect();
            lookup.insert(c.to_vec(), points.len());
            points.push(InformationState::new(0, n, joint).expect("lattice points are normalized"));
        });
        Ok(Self {
            n_states: n,
            horizon: view.horizon(),
            delta,
            points: Points::Simplex {
                resolution,
                points,
                lookup,
            },
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.points, Points::Exact(_))
    }

    pub fn kind(&self) -> &'static str {
        match self.points {
            Points::Exact(_) => "exact",
            Points::Simplex { .. } => "simplex",
        }
    }

    pub fn points(&self, t: usize) -> &[InformationState] {
        match &self.points {
            Points::Exact(layers) => &layers[t],
            Points::Simplex { points, .. } => points,
        }
    }

    pub fn len(&self, t: usize) -> usize {
        self.points(t).len()
    }

    pub fn is_empty(&self, t: usize) -> bool {
        self.points(t).is_empty()
    }

    /// Nearest representative at step `t`; a distance above `delta` is a
    /// resolution error.
    pub fn project(&self, t: usize, pi: &InformationState) -> Result<Projection> {
        if t > self.horizon {
            return Err(Error::Domain(format!("t={t} beyond the grid horizon")));
        }
        if pi.n_states() != self.n_states {
            return Err(Error::Configuration(format!(
                "belief over {} states projected onto a grid over {}",
                pi.n_states(),
                self.n_states
            )));
        }
        let projection = match &self.points {
            Points::Exact(layers) => {
                let mut best = Projection {
                    index: usize::MAX,
                    distance: f64::INFINITY,
                };
                for (index, point) in layers[t].iter().enumerate() {
                    let distance = point.l1_distance(pi);
                    if distance < best.distance {
                        best = Projection { index, distance };
                    }
                }
                best
            }
            Points::Simplex {
                resolution,
                points,
                lookup,
            } => {
                let counts = round_to_lattice(pi.joint(), *resolution);
                let index = lookup[&counts];
                Projection {
                    index,
                    distance: points[index].l1_distance(pi),
                }
            }
        };
        if projection.distance > self.delta {
            return Err(Error::Resolution {
                t,
                distance: projection.distance,
                delta: self.delta,
            });
        }
        Ok(projection)
    }
}

fn insert_unique(points: &mut Vec<InformationState>, pi: InformationState) {
    if points
        .iter()
        .all(|p| p.l1_distance(&pi) > EXACT_TOLERANCE)
    {
        points.push(pi);
    }
}

/// `C(N + d − 1, d − 1)`, saturating.
fn lattice_size(resolution: usize, dim: usize) -> u128 {
    let mut c: u128 = 1;
    for i in 0..(dim as u128 - 1) {
        c = c.saturating_mul(resolution as u128 + 1 + i) / (i + 1);
    }
    c
}

fn compositions(remaining: u32, pos: usize, counts: &mut [u32], emit: &mut impl FnMut(&[u32])) {
    if pos == counts.len() - 1 {
        counts[pos] = remaining;
        emit(counts);
        return;
    }
    for k in (0..=remaining).rev() {
        counts[pos] = k;
        compositions(remaining - k, pos + 1, counts, emit);
    }
}

/// Largest-remainder rounding of `p · N` to integers summing to `N`; ties
/// go to the lowest index. This is the L1-nearest lattice point.
fn round_to_lattice(p: &[f64], resolution: usize) -> Vec<u32> {
    let scaled: Vec<f64> = p.iter().map(|v| v * resolution as f64).collect();
    let mut counts: Vec<u32> = scaled.iter().map(|v| (v + 1e-9).floor() as u32).collect();
    let assigned: i64 = counts.iter().map(|&c| c as i64).sum();
    let mut missing = resolution as i64 - assigned;
    let mut order: Vec<usize> = (0..p.len()).collect();
    let remainder = |i: usize| scaled[i] - counts[i] as f64;
    if missing >= 0 {
        order.sort_by(|&a, &b| remainder(b).total_cmp(&remainder(a)).then(a.cmp(&b)));
        for &i in order.iter().cycle().take(missing as usize) {
            counts[i] += 1;
        }
    } else {
        order.sort_by(|&a, &b| remainder(a).total_cmp(&remainder(b)).then(a.cmp(&b)));
        for &i in &order {
            if missing == 0 {
                break;
            }
            if counts[i] > 0 {
                counts[i] -= 1;
                missing += 1;
            }
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::builtin_discrete_toy;
    use proptest::prelude::*;

    #[test]
    fn toy_reachable_layers() {
        let s = builtin_discrete_toy();
        let grid = BeliefGrid::reachable(&s.model_view(), &ActualKernel::exact(&s)).unwrap();
        // x0 is known, so both first readings give the same belief
        assert_eq!(grid.len(0), 1);
        assert!(grid.len(1) >= 2);
        for t in 0..=2 {
            for (i, p) in grid.points(t).iter().enumerate() {
                let proj = grid.project(t, p).unwrap();
                assert_eq!(proj.index, i);
                assert_eq!(proj.distance, 0.0);
            }
        }
    }

    #[test]
    fn unreachable_belief_is_a_resolution_error() {
        let s = builtin_discrete_toy();
        let grid = BeliefGrid::reachable(&s.model_view(), &ActualKernel::exact(&s)).unwrap();
        let odd = InformationState::new(0, 2, vec![0.25; 4]).unwrap();
        assert!(matches!(grid.project(0, &odd), Err(Error::Resolution { t: 0, .. })));
    }

    #[test]
    fn lattice_size_matches_enumeration() {
        let s = builtin_discrete_toy();
        let grid = BeliefGrid::simplex(&s.model_view(), 0.5).unwrap();
        // N = 8, d = 4: C(11, 3)
        assert_eq!(grid.len(0), 165);
        assert_eq!(lattice_size(8, 4), 165);
    }

    #[test]
    fn rounding_ties_go_low() {
        assert_eq!(round_to_lattice(&[0.5, 0.5], 1), vec![1, 0]);
        assert_eq!(round_to_lattice(&[0.25, 0.25, 0.25, 0.25], 2), vec![1, 1, 0, 0]);
    }

    proptest! {
        #[test]
        fn simplex_projection_within_delta(raw in proptest::collection::vec(0.0f64..1.0, 4)) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 1e-6);
            let s = builtin_discrete_toy();
            let grid = BeliefGrid::simplex(&s.model_view(), 0.2).unwrap();
            let pi = InformationState::from_weights(1, 2, raw).unwrap();
            let proj = grid.project(1, &pi).unwrap();
            prop_assert!(proj.distance <= 0.2);
            // idempotent
            let again = grid.project(1, &grid.points(1)[proj.index]).unwrap();
            prop_assert_eq!(again.index, proj.index);
            prop_assert_eq!(again.distance, 0.0);
        }
    }
}
