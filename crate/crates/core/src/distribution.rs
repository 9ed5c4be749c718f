//! Finite-support probability masses and scalar Gaussian laws.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Tolerance on the total mass of a [`Distribution`].
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Probability mass over an ordered, labeled, finite outcome set.
///
/// Zero-mass labels are allowed and kept, so two distributions over the same
/// outcome set compare entry by entry.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution<K> {
    support: Vec<K>,
    mass: Vec<f64>,
}

impl<K: Clone + PartialEq + Debug> Distribution<K> {
    /// Builds a distribution, checking that the masses are nonnegative, sum
    /// to one within [`MASS_TOLERANCE`], and that labels are unique.
    pub fn new(support: Vec<K>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::invariant(
                "support",
                format!("{} labels but {} masses", support.len(), mass.len()),
            ));
        }
        if support.is_empty() {
            return Err(Error::invariant("support", "empty outcome set"));
        }
        if let Some(m) = mass.iter().find(|m| !m.is_finite() || **m < 0.0) {
            return Err(Error::invariant(
                "nonnegative",
                format!("mass {m} is negative or not finite"),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invariant(
                "normalization",
                format!("masses sum to {total}"),
            ));
        }
        for (i, k) in support.iter().enumerate() {
            if support[..i].contains(k) {
                return Err(Error::invariant(
                    "unique support",
                    format!("label {k:?} appears twice"),
                ));
            }
        }
        Ok(Self { support, mass })
    }

    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(support: Vec<K>, weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invariant(
                "normalization",
                format!("weights sum to {total}"),
            ));
        }
        let mass = weights.into_iter().map(|w| w / total).collect();
        Self::new(support, mass)
    }

    pub fn point(label: K) -> Self {
        Self {
            support: vec![label],
            mass: vec![1.0],
        }
    }

    pub fn support(&self) -> &[K] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.support.iter().zip(self.mass.iter().copied())
    }

    /// Mass of `label`, zero if the label is not in the support.
    pub fn prob(&self, label: &K) -> f64 {
        self.position(label).map_or(0.0, |i| self.mass[i])
    }

    pub fn position(&self, label: &K) -> Option<usize> {
        self.support.iter().position(|k| k == label)
    }

    /// Index of the largest mass; ties go to the lowest index.
    pub fn mode_index(&self) -> usize {
        let mut best = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m > self.mass[best] {
                best = i;
            }
        }
        best
    }

    /// Inverse-CDF draw for a uniform variate in `[0, 1)`.
    ///
    /// Zero-mass outcomes are never returned.
    pub fn sample_index(&self, uniform: f64) -> usize {
        let mut acc = 0.0;
        let mut last_positive = 0;
        for (i, &m) in self.mass.iter().enumerate() {
            if m <= 0.0 {
                continue;
            }
            last_positive = i;
            acc += m;
            if uniform < acc {
                return i;
            }
        }
        last_positive
    }
}

impl Distribution<usize> {
    /// Distribution over the index set `0..mass.len()`.
    pub fn dense(mass: Vec<f64>) -> Result<Self> {
        Self::new((0..mass.len()).collect(), mass)
    }

    pub fn dense_from_weights(weights: Vec<f64>) -> Result<Self> {
        Self::from_weights((0..weights.len()).collect(), weights)
    }

    /// Point mass on `index` inside the index set `0..n`.
    pub fn dense_point(n: usize, index: usize) -> Self {
        let mut mass = vec![0.0; n];
        mass[index] = 1.0;
        Self {
            support: (0..n).collect(),
            mass,
        }
    }
}

/// Total variation distance `½ Σ |p − q|` between two distributions over the
/// same outcome set. Labels are matched by value, not position.
pub fn tv_distance<K: Clone + PartialEq + Debug>(
    p: &Distribution<K>,
    q: &Distribution<K>,
) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::SupportMismatch(format!(
            "{} outcomes vs {} outcomes",
            p.len(),
            q.len()
        )));
    }
    let mut total = 0.0;
    for (k, pm) in p.iter() {
        let j = q
            .position(k)
            .ok_or_else(|| Error::SupportMismatch(format!("label {k:?} missing")))?;
        total += (pm - q.mass()[j]).abs();
    }
    Ok((0.5 * total).clamp(0.0, 1.0))
}

/// Scalar Gaussian law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    mean: f64,
    variance: f64,
}

impl Gaussian1D {
    pub fn new(mean: f64, variance: f64) -> Result<Self> {
        if !mean.is_finite() || !variance.is_finite() || variance < 0.0 {
            return Err(Error::invariant(
                "variance",
                format!("N({mean}, {variance}) is not a valid Gaussian"),
            ));
        }
        Ok(Self { mean, variance })
    }

    pub fn standard() -> Self {
        Self {
            mean: 0.0,
            variance: 1.0,
        }
    }

    pub fn point(mean: f64) -> Self {
        Self {
            mean,
            variance: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_masses() {
        let err = Distribution::dense(vec![0.5, 0.4]).unwrap_err();
        assert!(matches!(
            err,
            Error::Invariant {
                invariant: "normalization",
                ..
            }
        ));
        assert!(Distribution::dense(vec![1.2, -0.2]).is_err());
        assert!(Distribution::new(vec!["a", "a"], vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn tv_examples() {
        let p = Distribution::new(vec!["a", "b"], vec![0.5, 0.5]).unwrap();
        let q = Distribution::new(vec!["a", "b"], vec![0.9, 0.1]).unwrap();
        assert!((tv_distance(&p, &q).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);

        let left = Distribution::new(vec!["a", "b"], vec![1.0, 0.0]).unwrap();
        let right = Distribution::new(vec!["b", "a"], vec![1.0, 0.0]).unwrap();
        assert_eq!(tv_distance(&left, &right).unwrap(), 1.0);
    }

    #[test]
    fn tv_support_mismatch() {
        let p = Distribution::new(vec!["a", "b"], vec![0.5, 0.5]).unwrap();
        let q = Distribution::new(vec!["a", "c"], vec![0.5, 0.5]).unwrap();
        assert!(matches!(tv_distance(&p, &q), Err(Error::SupportMismatch(_))));
    }

    #[test]
    fn sampling_skips_zero_mass() {
        let d = Distribution::dense(vec![0.0, 1.0, 0.0]).unwrap();
        for u in [0.0, 0.3, 0.999_999] {
            assert_eq!(d.sample_index(u), 1);
        }
    }

    #[test]
    fn mode_ties_go_low() {
        let d = Distribution::dense(vec![0.25, 0.375, 0.375]).unwrap();
        assert_eq!(d.mode_index(), 1);
    }
}
