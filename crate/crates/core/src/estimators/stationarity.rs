//! Distributional comparisons of ROSt observables before and after
//! evolution: the quasi-stationarity test and the reduction of smooth
//! many-step evolution to one linear step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::bootstrap::{EstimateWithError, ReplicaTable};
use crate::estimators::sampled::{bootstrap_seed, EstimatorOptions};
use crate::evolution::step::Evolver;
use crate::psi::PsiSpec;
use crate::replicas::par_indexed;
use crate::rng::{tag, Seed};
use crate::rost::Rost;
use crate::samplers::rpc::RostSource;
use crate::stats::{bonferroni_threshold, z_score};

/// Minimum replicas per side of a comparison.
pub const MIN_COMPARISON_REPLICAS: usize = 200;

/// Grid of the sampled overlap distribution function in the observable
/// vector.
pub fn observable_grid() -> Vec<f64> {
    (0..9).map(|i| i as f64 / 8.0).collect()
}

/// Names of the observable vector components.
pub fn observable_names() -> Vec<String> {
    let mut names = vec!["sum_xi2".to_string(), "sum_xi3".to_string(), "xi1".to_string()];
    names.extend(observable_grid().iter().map(|g| format!("cdf_{g:.3}")));
    names
}

/// `(sum xi^2, sum xi^3, xi_1, x(g) for g in the grid)`; the distribution
/// function is estimated from `k` sampled pairs.
pub fn observable_vector(rost: &Rost, k: usize, seed: Seed) -> Vec<f64> {
    let w = rost.weights();
    let grid = observable_grid();
    let mut out = vec![w.power_sum(2), w.power_sum(3), w.top()];
    let sampler = w.index_sampler();
    let mut rng = seed.rng();
    let mut counts = vec![0usize; grid.len()];
    for _ in 0..k {
        let q = rost.overlap(sampler.sample(&mut rng), sampler.sample(&mut rng));
        let first = grid.partition_point(|&g| g < q);
        for c in &mut counts[first..] {
            *c += 1;
        }
    }
    out.extend(counts.iter().map(|&c| c as f64 / k as f64));
    out
}

/// Component-wise two-sample comparison of observable vectors.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub names: Vec<String>,
    pub reference: Vec<EstimateWithError>,
    pub candidate: Vec<EstimateWithError>,
    /// `(candidate - reference) / sqrt(se_c^2 + se_r^2)` per component.
    pub z: Vec<f64>,
    pub max_abs_z: f64,
    pub family_level: f64,
    /// Two-sided Bonferroni critical value for all components.
    pub threshold: f64,
    pub pass: bool,
}

impl ComparisonReport {
    pub fn from_tables(
        reference: &ReplicaTable,
        candidate: &ReplicaTable,
        family_level: f64,
        seed: Seed,
    ) -> Result<Self> {
        if !(family_level > 0.0 && family_level < 1.0) {
            return Err(Error::invalid(format!("family level {family_level} outside (0,1)")));
        }
        let opts = EstimatorOptions::default();
        let reference = reference.component_estimates(opts.bootstrap_resamples, seed.child(tag::PRE))?;
        let candidate = candidate.component_estimates(opts.bootstrap_resamples, seed.child(tag::POST))?;
        let z: Vec<f64> = candidate
            .iter()
            .zip(&reference)
            .map(|(c, r)| z_score(c.value, c.std_error, r.value, r.std_error))
            .collect();
        let max_abs_z = z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let threshold = bonferroni_threshold(family_level, z.len());
        Ok(ComparisonReport {
            names: observable_names(),
            reference,
            candidate,
            z,
            max_abs_z,
            family_level,
            threshold,
            pass: max_abs_z <= threshold,
        })
    }
}

fn check_replicas(n: usize) -> Result<()> {
    if n < MIN_COMPARISON_REPLICAS {
        return Err(Error::invalid(format!(
            "need at least {MIN_COMPARISON_REPLICAS} replicas, got {n}"
        )));
    }
    Ok(())
}

/// Observable vectors of `n` replicas of `source` after `steps` steps of
/// `psi`, all streams below `seed`.
fn evolved_observables(
    source: &dyn RostSource,
    psi: PsiSpec,
    r: u32,
    steps: usize,
    n: usize,
    k: usize,
    seed: Seed,
) -> Result<ReplicaTable> {
    let rows = par_indexed(n, |i| {
        let i = i as u64;
        let mut rost = source.sample(seed.path(&[tag::REPLICA, i]))?;
        if steps > 0 {
            let ev = Evolver::for_rost(&rost, psi, r)?;
            let mut rng = seed.path(&[tag::EVOLVE, i]).rng();
            for _ in 0..steps {
                rost = ev.step(&rost, &mut rng)?.0;
            }
        }
        Ok(observable_vector(&rost, k, seed.path(&[tag::DRAWS, i])))
    })?;
    ReplicaTable::new(observable_names().len(), rows, k)
}

/// Compares `n` fresh replicas with `n` independent replicas evolved by one
/// step of `psi`.
pub fn quasi_stationarity_test(
    source: &dyn RostSource,
    psi: PsiSpec,
    r: u32,
    n_replicas: usize,
    k: usize,
    family_level: f64,
    seed: Seed,
) -> Result<ComparisonReport> {
    check_replicas(n_replicas)?;
    psi.validate()?;
    if k == 0 {
        return Err(Error::invalid("draws per replica must be positive"));
    }
    let pre = evolved_observables(source, psi, r, 0, n_replicas, k, seed.child(tag::PRE))?;
    let post = evolved_observables(source, psi, r, 1, n_replicas, k, seed.child(tag::POST))?;
    ComparisonReport::from_tables(&pre, &post, family_level, bootstrap_seed(seed))
}

/// Smooth `T`-step evolution with `beta(T)` scaling against one linear step.
#[derive(Clone, Debug, Serialize)]
pub struct CltReport {
    pub h: f64,
    pub lambda: f64,
    pub steps: usize,
    pub beta: f64,
    /// Reference: one linear step; candidate: `T` smooth steps.
    pub comparison: ComparisonReport,
}

/// Runs `T` steps with increments `psi(beta(T) kappa + h)` and compares the
/// terminal observables with one step of `lambda kappa`. The constant
/// `psi(h)` shift of each increment cancels in the normalization.
#[allow(clippy::too_many_arguments)]
pub fn clt_reduction_experiment(
    source: &dyn RostSource,
    h: f64,
    lambda: f64,
    r: u32,
    steps: usize,
    n_replicas: usize,
    k: usize,
    family_level: f64,
    seed: Seed,
) -> Result<CltReport> {
    if steps < 16 {
        return Err(Error::invalid(format!("T must be at least 16, got {steps}")));
    }
    check_replicas(n_replicas)?;
    let smooth = smooth_psi(h, lambda, steps)?;
    let beta = match smooth {
        PsiSpec::SmoothShifted { beta, .. } => beta,
        PsiSpec::Linear { .. } => unreachable!(),
    };
    let linear = evolved_observables(source, PsiSpec::linear(lambda), r, 1, n_replicas, k, seed.child(tag::LINEAR))?;
    let many = evolved_observables(source, smooth, r, steps, n_replicas, k, seed.child(tag::SMOOTH))?;
    Ok(CltReport {
        h,
        lambda,
        steps,
        beta,
        comparison: ComparisonReport::from_tables(&linear, &many, family_level, bootstrap_seed(seed))?,
    })
}

fn smooth_psi(h: f64, lambda: f64, steps: usize) -> Result<PsiSpec> {
    if lambda == 0.0 {
        if h.tanh() == 0.0 {
            return Err(Error::invalid("base'(h) = 0; the scaling needs a nonzero slope at h"));
        }
        return Ok(PsiSpec::SmoothShifted { beta: 0.0, h });
    }
    PsiSpec::clt_scaled(h, lambda, steps)
}

/// Empirical variance over replicas and particles of each particle's summed
/// centered increments `sum_t (psi(beta kappa(t) + h) - psi(h))`, which
/// approaches `lambda^2` as `T` grows.
pub fn clt_increment_variance(
    source: &dyn RostSource,
    h: f64,
    lambda: f64,
    r: u32,
    steps: usize,
    n_replicas: usize,
    seed: Seed,
) -> Result<EstimateWithError> {
    if steps == 0 || n_replicas < 2 {
        return Err(Error::invalid("need T >= 1 and at least two replicas"));
    }
    let psi = smooth_psi(h, lambda, steps)?;
    let shift = steps as f64 * crate::psi::log_cosh(h);
    let rows = par_indexed(n_replicas, |i| {
        let i = i as u64;
        let rost = source.sample(seed.path(&[tag::REPLICA, i]))?;
        let ev = Evolver::for_rost(&rost, psi, r)?;
        let traj = ev.run_observed(&rost, steps, false, &mut seed.path(&[tag::EVOLVE, i]).rng(), |_, _, _| {})?;
        let (mut s1, mut s2) = (0.0, 0.0);
        for &c in traj.cumulative_increments() {
            let v = c - shift;
            s1 += v;
            s2 += v * v;
        }
        Ok(vec![s1, s2, rost.dim() as f64])
    })?;
    let table = ReplicaTable::new(3, rows, steps)?;
    let total = table.means()[2] * table.n_replicas() as f64;
    let var = move |m: &[f64]| {
        let mean = m[0] / m[2];
        (m[1] / m[2] - mean * mean) * total / (total - 1.0)
    };
    table.estimate(&var, EstimatorOptions::default().bootstrap_resamples, bootstrap_seed(seed))
}
