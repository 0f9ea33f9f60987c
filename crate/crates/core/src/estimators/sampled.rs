use crate::cdf::EmpiricalCdf;
use crate::error::{Error, Result};
use crate::estimators::bootstrap::{EstimateWithError, ReplicaTable, DEFAULT_RESAMPLES};
use crate::estimators::observable::ObservableSpec;
use crate::replicas::Replicas;
use crate::rng::{tag, Seed};

/// Default cap on index draws per replica.
pub const DEFAULT_DRAW_BUDGET: u64 = 1 << 32;

/// Settings shared by the sampled estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EstimatorOptions {
    pub bootstrap_resamples: usize,
    pub draw_budget: u64,
}

impl Default for EstimatorOptions {
    fn default() -> Self {
        EstimatorOptions {
            bootstrap_resamples: DEFAULT_RESAMPLES,
            draw_budget: DEFAULT_DRAW_BUDGET,
        }
    }
}

impl EstimatorOptions {
    /// Fails when `draws * width` index draws per replica exceed the budget.
    pub fn check_budget(&self, draws: usize, width: usize) -> Result<()> {
        let requested = (draws as u64).checked_mul(width as u64).unwrap_or(u64::MAX);
        if requested > self.draw_budget {
            return Err(Error::BudgetExceeded {
                requested,
                budget: self.draw_budget,
            });
        }
        Ok(())
    }
}

/// Seed of the index draws on replica `i`.
pub(crate) fn draw_seed(seed: Seed, i: usize) -> Seed {
    seed.path(&[tag::DRAWS, i as u64])
}

pub(crate) fn bootstrap_seed(seed: Seed) -> Seed {
    seed.child(tag::BOOTSTRAP)
}

/// `E^(s)[F]`: on each replica, `k` independent `s`-tuples of indices drawn
/// i.i.d. from the weights (coincident indices have overlap 1), averaged.
pub fn sampled_expectation(
    replicas: Replicas<'_>,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
) -> Result<EstimateWithError> {
    sampled_expectation_with(replicas, obs, k, seed, &EstimatorOptions::default())
}

pub fn sampled_expectation_with(
    replicas: Replicas<'_>,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
    opts: &EstimatorOptions,
) -> Result<EstimateWithError> {
    obs.validate()?;
    if k == 0 {
        return Err(Error::invalid("draws per replica must be positive"));
    }
    opts.check_budget(k, obs.s)?;
    let s = obs.s;
    let values = replicas.map(|i, rost| {
        let mut rng = draw_seed(seed, i).rng();
        let sampler = rost.weights().index_sampler();
        let mut idx = vec![0usize; s];
        let mut acc = 0.0;
        for _ in 0..k {
            for slot in idx.iter_mut() {
                *slot = sampler.sample(&mut rng);
            }
            acc += obs.eval(|a, b| rost.overlap(idx[a], idx[b]));
        }
        Ok(acc / k as f64)
    })?;
    ReplicaTable::from_scalars(values, k)?.estimate(
        &|m| m[0],
        opts.bootstrap_resamples,
        bootstrap_seed(seed),
    )
}

/// `xi`-sampled overlap distribution function `E[sum_ij xi_i xi_j 1{q_ij <= q}]`
/// on `grid`, from `k` sampled pairs per replica shared by all grid points.
pub fn estimate_overlap_cdf(
    replicas: Replicas<'_>,
    grid: &[f64],
    k: usize,
    seed: Seed,
) -> Result<EmpiricalCdf> {
    if grid.is_empty() || grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("grid must be non-empty and strictly increasing"));
    }
    if k == 0 {
        return Err(Error::invalid("draws per replica must be positive"));
    }
    let opts = EstimatorOptions::default();
    opts.check_budget(k, 2)?;
    let rows = replicas.map(|i, rost| {
        let mut rng = draw_seed(seed, i).rng();
        let sampler = rost.weights().index_sampler();
        let mut counts = vec![0usize; grid.len()];
        for _ in 0..k {
            let a = sampler.sample(&mut rng);
            let b = sampler.sample(&mut rng);
            let q = rost.overlap(a, b);
            // grid points at or above q
            let first = grid.partition_point(|&g| g < q);
            for c in &mut counts[first..] {
                *c += 1;
            }
        }
        Ok(counts.iter().map(|&c| c as f64 / k as f64).collect())
    })?;
    let table = ReplicaTable::new(grid.len(), rows, k)?;
    let values = table.component_estimates(opts.bootstrap_resamples, bootstrap_seed(seed))?;
    Ok(EmpiricalCdf {
        grid: grid.to_vec(),
        values,
        includes_diagonal: true,
    })
}

/// Fraction of `xi`-sampled triples with `q_ik < min(q_ij, q_jk) - tol`.
pub fn ultrametric_violation(
    replicas: Replicas<'_>,
    n_triples: usize,
    tol: f64,
    seed: Seed,
) -> Result<f64> {
    if !(tol >= 0.0) {
        return Err(Error::invalid(format!("tolerance {tol} must be >= 0")));
    }
    if n_triples == 0 {
        return Err(Error::invalid("need at least one triple per replica"));
    }
    EstimatorOptions::default().check_budget(n_triples, 3)?;
    let counts = replicas.map(|i, rost| {
        let mut rng = draw_seed(seed, i).rng();
        let sampler = rost.weights().index_sampler();
        let mut bad = 0u64;
        for _ in 0..n_triples {
            let a = sampler.sample(&mut rng);
            let b = sampler.sample(&mut rng);
            let c = sampler.sample(&mut rng);
            if rost.overlap(a, c) < rost.overlap(a, b).min(rost.overlap(b, c)) - tol {
                bad += 1;
            }
        }
        Ok(bad)
    })?;
    let total = (counts.len() * n_triples) as f64;
    Ok(counts.iter().sum::<u64>() as f64 / total)
}
