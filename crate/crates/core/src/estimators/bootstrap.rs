use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// Default number of bootstrap resamples.
pub const DEFAULT_RESAMPLES: usize = 400;
/// Lower bound on bootstrap resamples.
pub const MIN_RESAMPLES: usize = 200;

/// A Monte Carlo estimate with its bootstrap standard error over replicas.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimateWithError {
    pub value: f64,
    pub std_error: f64,
    pub n_replicas: usize,
    pub n_draws_per_replica: usize,
}

impl EstimateWithError {
    /// `(value - target) / std_error`, zero when both sides agree exactly.
    pub fn z_against(&self, target: f64) -> f64 {
        crate::stats::z_score(self.value, self.std_error, target, 0.0)
    }
}

/// Per-replica component vectors and the resampling that turns statistics
/// of their means into estimates with errors.
///
/// Row `i` holds the `dim` components measured on replica `i`. Each
/// statistic is a function of the component means; the bootstrap resamples
/// replicas with replacement and recomputes every statistic on the same
/// resamples.
#[derive(Clone, Debug)]
pub struct ReplicaTable {
    dim: usize,
    data: Vec<f64>,
    draws: usize,
}

impl ReplicaTable {
    pub fn new(dim: usize, rows: Vec<Vec<f64>>, draws_per_replica: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("no replicas to estimate from"));
        }
        let mut data = Vec::with_capacity(dim * rows.len());
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Ok(ReplicaTable {
            dim,
            data,
            draws: draws_per_replica,
        })
    }

    pub fn from_scalars(values: Vec<f64>, draws_per_replica: usize) -> Result<Self> {
        Self::new(1, values.into_iter().map(|v| vec![v]).collect(), draws_per_replica)
    }

    pub fn n_replicas(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Component means in replica order.
    pub fn means(&self) -> Vec<f64> {
        let n = self.n_replicas();
        let mut acc = vec![0.0; self.dim];
        for i in 0..n {
            for (a, v) in acc.iter_mut().zip(self.row(i)) {
                *a += v;
            }
        }
        acc.iter().map(|a| a / n as f64).collect()
    }

    /// Estimates of each statistic, sharing the same bootstrap resamples.
    pub fn estimate_all(
        &self,
        stats: &[&dyn Fn(&[f64]) -> f64],
        resamples: usize,
        seed: Seed,
    ) -> Result<Vec<EstimateWithError>> {
        if resamples < MIN_RESAMPLES {
            return Err(Error::invalid(format!(
                "bootstrap needs at least {MIN_RESAMPLES} resamples, got {resamples}"
            )));
        }
        let n = self.n_replicas();
        let full = self.means();
        let values: Vec<f64> = stats.iter().map(|s| s(&full)).collect();
        let mut sum = vec![0.0; stats.len()];
        let mut sum_sq = vec![0.0; stats.len()];
        let mut rng = seed.rng();
        let mut acc = vec![0.0; self.dim];
        for _ in 0..resamples {
            acc.iter_mut().for_each(|a| *a = 0.0);
            for _ in 0..n {
                let i = rng.random_range(0..n);
                for (a, v) in acc.iter_mut().zip(self.row(i)) {
                    *a += v;
                }
            }
            acc.iter_mut().for_each(|a| *a /= n as f64);
            for (k, s) in stats.iter().enumerate() {
                // deviations from the full-sample value keep the variance
                // exact when every resample reproduces it
                let d = s(&acc) - values[k];
                sum[k] += d;
                sum_sq[k] += d * d;
            }
        }
        let b = resamples as f64;
        Ok(values
            .iter()
            .enumerate()
            .map(|(k, &value)| {
                let mean = sum[k] / b;
                let var = ((sum_sq[k] - b * mean * mean) / (b - 1.0)).max(0.0);
                EstimateWithError {
                    value,
                    std_error: var.sqrt(),
                    n_replicas: n,
                    n_draws_per_replica: self.draws,
                }
            })
            .collect())
    }

    pub fn estimate(
        &self,
        stat: &dyn Fn(&[f64]) -> f64,
        resamples: usize,
        seed: Seed,
    ) -> Result<EstimateWithError> {
        Ok(self.estimate_all(&[stat], resamples, seed)?[0])
    }

    /// Mean of each component with its standard error.
    pub fn component_estimates(&self, resamples: usize, seed: Seed) -> Result<Vec<EstimateWithError>> {
        let projections: Vec<Box<dyn Fn(&[f64]) -> f64>> = (0..self.dim)
            .map(|k| Box::new(move |m: &[f64]| m[k]) as Box<dyn Fn(&[f64]) -> f64>)
            .collect();
        let refs: Vec<&dyn Fn(&[f64]) -> f64> = projections.iter().map(|b| b.as_ref()).collect();
        self.estimate_all(&refs, resamples, seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn constant_data_has_zero_error() {
        let t = ReplicaTable::from_scalars(vec![1.0; 50], 1).unwrap();
        let e = t.estimate(&|m| m[0], DEFAULT_RESAMPLES, Seed(1)).unwrap();
        assert_eq!(e.value, 1.0);
        assert_eq!(e.std_error, 0.0);
    }

    #[test]
    fn error_of_mean_matches_formula() {
        let mut rng = Seed(2).rng();
        let xs: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let t = ReplicaTable::from_scalars(xs, 1).unwrap();
        let e = t.estimate(&|m| m[0], 1000, Seed(3)).unwrap();
        let expected = 1.0 / (2000f64).sqrt();
        assert!((e.std_error / expected - 1.0).abs() < 0.1, "{}", e.std_error);
    }

    #[test]
    fn rejects_too_few_resamples() {
        let t = ReplicaTable::from_scalars(vec![1.0, 2.0], 1).unwrap();
        assert!(t.estimate(&|m| m[0], 50, Seed(1)).is_err());
    }

    #[test]
    fn nonlinear_statistic_uses_product_of_means() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        let t = ReplicaTable::new(2, rows, 1).unwrap();
        let e = t.estimate(&|m| m[0] * m[1], 200, Seed(4)).unwrap();
        assert_eq!(e.value, 0.25);
    }
}
