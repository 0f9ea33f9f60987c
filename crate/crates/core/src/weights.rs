use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Tolerance on the normalization of ranked weights.
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Normalized, decreasing weight sequence: the top-N truncation of a point
/// of the space of mass partitions.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct RankedWeights {
    values: Vec<f64>,
}

impl RankedWeights {
    /// Validates an already ranked and normalized sequence.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidWeights("empty weight sequence".into()));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "weight {i} is {} (must be finite and nonnegative)",
                values[i]
            )));
        }
        if let Some(i) = values.windows(2).position(|w| w[0] < w[1]) {
            return Err(Error::InvalidWeights(format!(
                "weights not decreasing at rank {}: {} < {}",
                i + 1,
                values[i],
                values[i + 1]
            )));
        }
        let total: f64 = values.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(RankedWeights { values })
    }

    /// Sorts (stable, decreasing) and renormalizes arbitrary nonnegative
    /// masses. Returns the weights and `order`, where `order[rank]` is the
    /// input position now at `rank`.
    pub fn from_masses(masses: &[f64]) -> Result<(Self, Vec<usize>)> {
        if let Some(i) = masses.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidWeights(format!(
                "mass {i} is {} (must be finite and nonnegative)",
                masses[i]
            )));
        }
        let total: f64 = masses.iter().sum();
        if !(total > 0.0) {
            return Err(Error::NumericalFailure(
                "all masses vanish; cannot normalize".into(),
            ));
        }
        let mut order: Vec<usize> = (0..masses.len()).collect();
        order.sort_by(|&a, &b| masses[b].total_cmp(&masses[a]));
        let values = order.iter().map(|&i| masses[i] / total).collect();
        Ok((RankedWeights { values }, order))
    }

    /// Geometric weights proportional to `ratio^i`, renormalized.
    pub fn geometric(n: usize, ratio: f64) -> Result<Self> {
        if n == 0 || !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::invalid(format!(
                "geometric weights need n >= 1 and ratio in (0,1), got n={n}, ratio={ratio}"
            )));
        }
        let masses: Vec<f64> = (0..n).map(|i| ratio.powi(i as i32)).collect();
        Ok(Self::from_masses(&masses)?.0)
    }

    pub(crate) fn from_sorted_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.windows(2).all(|w| w[0] >= w[1]));
        RankedWeights { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn top(&self) -> f64 {
        self.values[0]
    }

    /// `sum_i xi_i^p`.
    pub fn power_sum(&self, p: i32) -> f64 {
        self.values.iter().map(|v| v.powi(p)).sum()
    }

    pub fn index_sampler(&self) -> IndexSampler {
        IndexSampler::new(&self.values)
    }
}

/// Draws ranks i.i.d. from the weights by inversion of the cumulative sums.
#[derive(Clone, Debug)]
pub struct IndexSampler {
    cumulative: Vec<f64>,
}

impl IndexSampler {
    pub fn new(weights: &[f64]) -> Self {
        let mut acc = 0.0;
        let cumulative = weights
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect();
        IndexSampler { cumulative }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let total = *self.cumulative.last().expect("nonempty weights");
        let u = rng.random::<f64>() * total;
        // first rank whose cumulative mass exceeds u
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.cumulative.len() - 1)
    }
}
