use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::bootstrap::{EstimateWithError, ReplicaTable};
use crate::estimators::sampled::{bootstrap_seed, EstimatorOptions};
use crate::psi::PsiSpec;
use crate::replicas::Replicas;
use crate::rng::{tag, Seed};
use crate::rost::Rost;
use crate::samplers::field::FieldSampler;
use crate::stats::{normal_pdf, simpson, z_score};

/// `log sum_i xi_i e^{lambda psi_i}` and the tilted mean of `psi`.
fn log_partition(log_weights: &[f64], psi: &[f64], lambda: f64) -> (f64, f64) {
    let shift = log_weights
        .iter()
        .zip(psi)
        .map(|(l, p)| l + lambda * p)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut first = 0.0;
    for (l, p) in log_weights.iter().zip(psi) {
        let e = (l + lambda * p - shift).exp();
        z += e;
        first += e * p;
    }
    (shift + z.ln(), first / z)
}

/// Increments `psi(kappa)` by rank for `fields` independent fields on one
/// replica.
fn increments(rost: &Rost, psi: PsiSpec, r: u32, fields: usize, seed: Seed) -> Result<Vec<Vec<f64>>> {
    let sampler = FieldSampler::new(rost.label_overlaps(), r)?;
    let mut rng = seed.rng();
    let mut kappa = vec![0.0; rost.dim()];
    Ok((0..fields)
        .map(|_| {
            sampler.sample_into(&mut rng, &mut kappa);
            rost.labels().iter().map(|&l| psi.eval(kappa[l as usize])).collect()
        })
        .collect())
}

fn field_seed(seed: Seed, i: usize) -> Seed {
    seed.path(&[tag::FIELD, i as u64])
}

/// Per replica, for each `lambda`: the average over `fields` draws of
/// `log sum_i xi_i e^{lambda psi(kappa_i)}` and of the tilted mean of `psi`.
/// All `lambda` share the same fields.
fn pressure_table(
    replicas: Replicas<'_>,
    psi: PsiSpec,
    r: u32,
    lambdas: &[f64],
    fields: usize,
    seed: Seed,
) -> Result<ReplicaTable> {
    psi.validate()?;
    if lambdas.iter().any(|l| !l.is_finite()) {
        return Err(Error::invalid("lambda must be finite"));
    }
    if fields == 0 {
        return Err(Error::invalid("fields per replica must be positive"));
    }
    let nl = lambdas.len();
    let rows = replicas.map(|i, rost| {
        let logs: Vec<f64> = rost.weights().as_slice().iter().map(|w| w.ln()).collect();
        let mut acc = vec![0.0; 2 * nl];
        for inc in increments(rost, psi, r, fields, field_seed(seed, i))? {
            for (j, &lambda) in lambdas.iter().enumerate() {
                if lambda == 0.0 {
                    // log sum xi = 0 by normalization
                    acc[nl + j] += logs.iter().zip(&inc).map(|(l, p)| l.exp() * p).sum::<f64>();
                    continue;
                }
                let (lp, mean) = log_partition(&logs, &inc, lambda);
                acc[j] += lp;
                acc[nl + j] += mean;
            }
        }
        Ok(acc.iter().map(|a| a / fields as f64).collect())
    })?;
    ReplicaTable::new(2 * nl, rows, fields)
}

/// `P_r(lambda) = E[log sum_i xi_i e^{lambda psi(kappa_i)}]`, one estimate per
/// `lambda`, with `fields` fields per replica shared across the `lambda`s.
pub fn pressure_curve(
    replicas: Replicas<'_>,
    psi: PsiSpec,
    r: u32,
    lambdas: &[f64],
    fields: usize,
    seed: Seed,
) -> Result<Vec<EstimateWithError>> {
    let table = pressure_table(replicas, psi, r, lambdas, fields, seed)?;
    let opts = EstimatorOptions::default();
    let est = table.component_estimates(opts.bootstrap_resamples, bootstrap_seed(seed))?;
    Ok(est[..lambdas.len()].to_vec())
}

pub fn pressure(
    replicas: Replicas<'_>,
    psi: PsiSpec,
    r: u32,
    lambda: f64,
    fields: usize,
    seed: Seed,
) -> Result<EstimateWithError> {
    Ok(pressure_curve(replicas, psi, r, &[lambda], fields, seed)?[0])
}

/// `log g(lambda)` with `g(lambda) = int phi(z) e^{lambda psi(z)} dz`, the
/// upper bound on the pressure, by Simpson quadrature.
pub fn log_g(psi: PsiSpec, lambda: f64) -> f64 {
    let slope = match psi {
        PsiSpec::Linear { lambda: l } => l.abs(),
        PsiSpec::SmoothShifted { beta, .. } => beta,
    };
    let reach = 12.0 + lambda.abs() * slope * 2.0;
    let integrand = |z: f64| (lambda * psi.eval(z) - 0.5 * z * z).exp();
    let total = simpson(integrand, -reach, reach, 8000);
    (total * normal_pdf(0.0)).ln()
}

/// Finite-difference derivative of the pressure against the direct tilted
/// mean of one-step increments. The z-score combines the two standard
/// errors as if independent; the paired error would resolve the `eps^2`
/// bias of the central difference.
#[derive(Clone, Debug, Serialize)]
pub struct PressureDerivativeReport {
    pub lambda: f64,
    pub eps: f64,
    pub pressure: EstimateWithError,
    pub finite_difference: EstimateWithError,
    pub direct: EstimateWithError,
    pub z: f64,
    /// `P'(lambda + eps) - P'(lambda - eps)` from the direct estimates.
    pub second_difference: f64,
    pub convex: bool,
    pub upper_bound: f64,
}

pub fn pressure_derivative_check(
    replicas: Replicas<'_>,
    psi: PsiSpec,
    r: u32,
    lambda: f64,
    eps: f64,
    fields: usize,
    seed: Seed,
) -> Result<PressureDerivativeReport> {
    if !(eps > 1e-4 && eps < 1e-1) {
        return Err(Error::invalid(format!("eps = {eps} outside (1e-4, 1e-1)")));
    }
    let lambdas = [lambda - eps, lambda, lambda + eps];
    let table = pressure_table(replicas, psi, r, &lambdas, fields, seed)?;
    let opts = EstimatorOptions::default();
    let fd = move |m: &[f64]| (m[2] - m[0]) / (2.0 * eps);
    let pressure = |m: &[f64]| m[1];
    let direct = |m: &[f64]| m[4];
    let est = table.estimate_all(
        &[&pressure, &fd, &direct],
        opts.bootstrap_resamples,
        bootstrap_seed(seed),
    )?;
    let means = table.means();
    let second = means[5] - means[3];
    Ok(PressureDerivativeReport {
        lambda,
        eps,
        pressure: est[0],
        finite_difference: est[1],
        direct: est[2],
        z: z_score(est[1].value, est[1].std_error, est[2].value, est[2].std_error),
        second_difference: second,
        convex: second >= 0.0,
        upper_bound: log_g(psi, lambda),
    })
}
