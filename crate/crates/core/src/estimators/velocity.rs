use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::bootstrap::{EstimateWithError, ReplicaTable};
use crate::estimators::sampled::{bootstrap_seed, EstimatorOptions};
use crate::evolution::step::Evolver;
use crate::psi::PsiSpec;
use crate::replicas::par_indexed;
use crate::rng::{tag, Seed};
use crate::samplers::rpc::RostSource;

/// Replica averages of past velocities at several horizons of one run.
#[derive(Clone, Debug, Serialize)]
pub struct VelocityReport {
    pub checkpoints: Vec<usize>,
    /// 1-based ranks reported.
    pub ranks: Vec<usize>,
    /// `velocity[c][j]`: velocity of rank `ranks[j]` at `checkpoints[c]`.
    pub velocity: Vec<Vec<EstimateWithError>>,
    pub weighted_mean: Vec<EstimateWithError>,
    pub dispersion: Vec<EstimateWithError>,
    pub dispersion_top_k: usize,
}

impl VelocityReport {
    /// Max over the reported ranks of `|v - target|` at each checkpoint.
    pub fn max_deviation(&self, target: f64) -> Vec<f64> {
        self.velocity
            .iter()
            .map(|row| row.iter().fold(0.0f64, |m, e| m.max((e.value - target).abs())))
            .collect()
    }
}

/// Evolves `n_replicas` replicas of `source` up to the largest checkpoint
/// and records velocities of the top `top_ranks` ranks, the weighted mean
/// increment and the velocity dispersion over the top `dispersion_top_k`
/// ranks at each checkpoint.
#[allow(clippy::too_many_arguments)]
pub fn velocity_experiment(
    source: &dyn RostSource,
    psi: PsiSpec,
    r: u32,
    checkpoints: &[usize],
    n_replicas: usize,
    top_ranks: usize,
    dispersion_top_k: usize,
    seed: Seed,
) -> Result<VelocityReport> {
    let n = source.dim();
    if top_ranks == 0 || top_ranks > n || dispersion_top_k == 0 || dispersion_top_k > n {
        return Err(Error::invalid(format!("ranks must lie in 1..={n}")));
    }
    if n_replicas == 0 {
        return Err(Error::invalid("need at least one replica"));
    }
    let width = top_ranks + 2;
    let rows = par_indexed(n_replicas, |i| {
        let i = i as u64;
        let rost = source.sample(seed.path(&[tag::REPLICA, i]))?;
        let ev = Evolver::for_rost(&rost, psi, r)?;
        let snaps = ev.run_checkpoints(&rost, checkpoints, &mut seed.path(&[tag::EVOLVE, i]).rng())?;
        let mut row = Vec::with_capacity(width * snaps.len());
        for snap in &snaps {
            let v = snap.velocities();
            row.extend_from_slice(&v[..top_ranks]);
            row.push(snap.weighted_mean_increment());
            row.push(snap.velocity_dispersion(dispersion_top_k)?);
        }
        Ok(row)
    })?;
    let table = ReplicaTable::new(width * checkpoints.len(), rows, *checkpoints.last().unwrap())?;
    let est = table.component_estimates(EstimatorOptions::default().bootstrap_resamples, bootstrap_seed(seed))?;
    let mut velocity = Vec::new();
    let mut weighted_mean = Vec::new();
    let mut dispersion = Vec::new();
    for c in 0..checkpoints.len() {
        let block = &est[c * width..(c + 1) * width];
        velocity.push(block[..top_ranks].to_vec());
        weighted_mean.push(block[top_ranks]);
        dispersion.push(block[top_ranks + 1]);
    }
    Ok(VelocityReport {
        checkpoints: checkpoints.to_vec(),
        ranks: (1..=top_ranks).collect(),
        velocity,
        weighted_mean,
        dispersion,
        dispersion_top_k,
    })
}
