//! Experiment dispatch: runs one configured experiment and writes its
//! tables, result record and manifest.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, Result};
use serde::Serialize;
use serde_json::{json, Value};

use rost_core::estimators::{
    clt_reduction_experiment, estimate_overlap_cdf, identity_report, observable_grid,
    pressure_derivative_check, quasi_stationarity_test, ultrametric_violation, velocity_experiment,
    ComparisonReport, EstimateWithError, ReplicaTable, TermLayout, DEFAULT_RESAMPLES,
};
use rost_core::evolution::write_jsonl;
use rost_core::rng::tag;
use rost_core::{
    FixedSource, OverlapMatrix, ParametricCdf, PsiSpec, RankedWeights, Replicas, Rost, RostSource,
    RpcSource, Seed,
};

use crate::config::{Experiment, RunConfig, SourceKind};
use crate::output::{self, num, opt, FileRecord, Table};

/// Top entries of each step in the trajectory dump.
const DUMP_TOP_K: usize = 10;

/// Outcome of a run, mapped to the process exit status.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    /// All checks held.
    Pass,
    /// The run completed and a check was rejected.
    Fail,
    /// The run has no pass criterion and completed.
    Complete,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass | Status::Complete => 0,
            Status::Fail => 2,
        }
    }

    fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: Experiment,
    pub config_hash: String,
    pub seed: u64,
    pub status: Status,
    pub wall_clock_seconds: f64,
    pub summary: Value,
    pub files: Vec<FileRecord>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub status: Status,
    /// Contents of `result.json`.
    pub result: Value,
    pub manifest: RunManifest,
    pub output_dir: PathBuf,
}

/// What an experiment produces before anything is written.
struct Produced {
    status: Status,
    summary: Value,
    details: Value,
    tables: Vec<Table>,
    /// Extra files as `(name, contents)`.
    blobs: Vec<(&'static str, Vec<u8>)>,
}

/// The three-particle structure with `q_12 = q_23 = 0.7`, `q_13 = 0.1`,
/// which is positive definite and not ultrametric.
pub fn planted_rost() -> Rost {
    let q = OverlapMatrix::new(3, vec![1.0, 0.7, 0.1, 0.7, 1.0, 0.7, 0.1, 0.7, 1.0]).expect("planted overlaps");
    Rost::new(RankedWeights::new(vec![0.4, 0.35, 0.25]).expect("planted weights"), q).expect("planted structure")
}

pub fn make_source(config: &RunConfig) -> Result<Box<dyn RostSource>> {
    Ok(match config.source {
        SourceKind::Rpc => Box::new(RpcSource::new(config.cascade_cdf()?, config.n_atoms)?),
        SourceKind::Geometric => Box::new(FixedSource(Rost::new(
            RankedWeights::geometric(config.n_atoms, config.geometric_ratio)?,
            OverlapMatrix::identity(config.n_atoms),
        )?)),
        SourceKind::Planted => Box::new(FixedSource(planted_rost())),
    })
}

/// Runs the experiment of `config` and writes its files into `dir`.
pub fn run_experiment(config: &RunConfig, dir: &Path) -> Result<RunOutcome> {
    config.validate()?;
    let experiment = config
        .experiment
        .ok_or_else(|| anyhow!("experiment: not set in the configuration or on the command line"))?;
    let start = Instant::now();
    let produced = match experiment {
        Experiment::SampleRpc => sample_rpc(config)?,
        Experiment::Evolve => evolve(config)?,
        Experiment::QsTest => qs_test(config)?,
        Experiment::GgTest => identity_test(config, false)?,
        Experiment::AcTest => identity_test(config, true)?,
        Experiment::UltraTest => ultra_test(config)?,
        Experiment::Velocity => velocity(config)?,
        Experiment::Pressure => pressure(config)?,
        Experiment::CltDemo => clt_demo(config)?,
    };
    std::fs::create_dir_all(dir)?;
    let hash = config.hash();
    let mut files = Vec::new();
    for table in &produced.tables {
        files.push(output::file_record(&output::write_table(dir, table)?)?);
    }
    for (name, bytes) in &produced.blobs {
        let path = dir.join(name);
        std::fs::write(&path, bytes)?;
        files.push(output::file_record(&path)?);
    }
    let result = json!({
        "experiment": experiment,
        "config_hash": hash,
        "seed": config.seed,
        "status": produced.status,
        "summary": produced.summary,
        "details": produced.details,
    });
    let result_path = dir.join("result.json");
    output::write_json(&result_path, &result)?;
    files.push(output::file_record(&result_path)?);
    let manifest = RunManifest {
        tool: "rost",
        version: env!("CARGO_PKG_VERSION"),
        experiment,
        config_hash: hash,
        seed: config.seed,
        status: produced.status,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        summary: produced.summary,
        files,
    };
    output::write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(RunOutcome {
        status: produced.status,
        result,
        manifest,
        output_dir: dir.to_path_buf(),
    })
}

fn seed(config: &RunConfig) -> Seed {
    Seed(config.seed)
}

fn replica_seed(config: &RunConfig) -> Seed {
    seed(config).child(tag::REPLICA)
}

fn estimate_json(e: &EstimateWithError) -> Value {
    serde_json::to_value(e).expect("estimate serializes")
}

fn cascade(config: &RunConfig) -> Option<ParametricCdf> {
    match config.source {
        SourceKind::Rpc => config.cascade_cdf().ok(),
        _ => None,
    }
}

fn sample_rpc(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let replicas = Replicas::generated(source.as_ref(), config.n_replicas, replica_seed(config));
    let rows = replicas.map(|_, rost| {
        let w = rost.weights();
        let xi2 = if rost.dim() > 1 { w.as_slice()[1] } else { 0.0 };
        let q12 = if rost.dim() > 1 { rost.overlap(0, 1) } else { 1.0 };
        Ok(vec![w.power_sum(2), w.power_sum(3), w.top(), xi2, q12])
    })?;
    let mut table = Table::new("replicas.csv", output::REPLICAS_HEADER);
    for (i, row) in rows.iter().enumerate() {
        let mut cells = vec![i.to_string()];
        cells.extend(row.iter().map(|&v| num(v)));
        table.push(cells);
    }
    let moments = ReplicaTable::new(5, rows, 1)?.component_estimates(DEFAULT_RESAMPLES, seed(config).child(tag::BOOTSTRAP))?;
    let x = cascade(config);
    let grid = match &x {
        Some(x) => x.straddling_grid(),
        None => observable_grid(),
    };
    let cdf = estimate_overlap_cdf(replicas, &grid, config.draws_per_replica, seed(config).child(tag::DRAWS))?;
    let violation = ultrametric_violation(replicas, config.n_triples, 0.0, seed(config).child(tag::FIELD))?;
    let tol = &config.tolerances;
    let mut cdf_table = Table::new("overlap_cdf.csv", output::OVERLAP_CDF_HEADER);
    let mut max_cdf_error: f64 = 0.0;
    for (g, est) in grid.iter().zip(&cdf.values) {
        let target = x.as_ref().map(|x| x.eval(*g));
        if let Some(t) = target {
            max_cdf_error = max_cdf_error.max((est.value - t).abs());
        }
        cdf_table.push(vec![
            num(*g),
            num(est.value),
            num(est.std_error),
            opt(target),
            opt(target.map(|t| est.z_against(t))),
        ]);
    }
    let collision_target = x.as_ref().map(|x| 1.0 - x.mass_below_one());
    let status = match collision_target {
        Some(t) => Status::from_pass(
            max_cdf_error <= tol.law_abs
                && (moments[0].value - t).abs() <= tol.law_abs
                && violation <= tol.ultrametric,
        ),
        None => Status::Complete,
    };
    let summary = json!({
        "mean_sum_xi2": moments[0].value,
        "mean_sum_xi2_std_error": moments[0].std_error,
        "sum_xi2_target": collision_target,
        "max_cdf_error": x.as_ref().map(|_| max_cdf_error),
        "ultrametric_violation": violation,
    });
    let details = json!({
        "moments": {
            "sum_xi2": estimate_json(&moments[0]),
            "sum_xi3": estimate_json(&moments[1]),
            "xi1": estimate_json(&moments[2]),
            "xi2": estimate_json(&moments[3]),
            "q12": estimate_json(&moments[4]),
        },
        "overlap_cdf": cdf,
    });
    Ok(Produced {
        status,
        summary,
        details,
        tables: vec![table, cdf_table],
        blobs: Vec::new(),
    })
}

fn evolve(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let rost = source.sample(replica_seed(config).child(0))?;
    let traj = rost_core::run_trajectory(&rost, config.psi, config.r, config.steps, &mut seed(config).child(tag::EVOLVE).rng())?;
    traj.verify()?;
    let mut dump = Vec::new();
    write_jsonl(&traj, DUMP_TOP_K, &mut dump)?;
    let mut table = Table::new("velocities.csv", output::VELOCITIES_HEADER);
    let fin = traj.final_rost();
    let velocities = traj.velocities();
    for (rank, (&label, v)) in fin.labels().iter().zip(&velocities).enumerate() {
        table.push(vec![
            (rank + 1).to_string(),
            label.to_string(),
            num(fin.weights().as_slice()[rank]),
            num(*v),
        ]);
    }
    let top = config.dispersion_top_k.min(fin.dim());
    let summary = json!({
        "steps": traj.len(),
        "weighted_mean_increment": traj.weighted_mean_increment(),
        "velocity_dispersion": traj.velocity_dispersion(top)?,
        "top_velocities": &velocities[..config.top_ranks.min(fin.dim())],
    });
    Ok(Produced {
        status: Status::Complete,
        summary,
        details: json!({ "dispersion_top_k": top }),
        tables: vec![table],
        blobs: vec![("trajectory.jsonl", dump)],
    })
}

fn comparison_table(report: &ComparisonReport) -> Table {
    let mut table = Table::new("observables.csv", output::OBSERVABLES_HEADER);
    for (i, name) in report.names.iter().enumerate() {
        table.push(vec![
            name.clone(),
            num(report.reference[i].value),
            num(report.reference[i].std_error),
            num(report.candidate[i].value),
            num(report.candidate[i].std_error),
            num(report.z[i]),
        ]);
    }
    table
}

fn qs_test(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let report = quasi_stationarity_test(
        source.as_ref(),
        config.psi,
        config.r,
        config.n_replicas,
        config.draws_per_replica,
        config.tolerances.family_level,
        seed(config),
    )?;
    Ok(Produced {
        status: Status::from_pass(report.pass),
        summary: json!({
            "max_abs_z": report.max_abs_z,
            "threshold": report.threshold,
            "family_level": report.family_level,
        }),
        tables: vec![comparison_table(&report)],
        details: serde_json::to_value(&report)?,
        blobs: Vec::new(),
    })
}

/// Names of the identity terms in `TermLayout` order.
pub fn term_names(s: usize) -> Vec<String> {
    let layout = TermLayout { s };
    let mut names = vec![String::new(); layout.len()];
    names[TermLayout::F] = "F".into();
    names[TermLayout::Q2] = "Q2".into();
    for l in 0..s {
        names[layout.a(l)] = format!("A_{}", l + 1);
        for lp in (l + 1)..s {
            names[layout.p(l, lp)] = format!("P_{}_{}", l + 1, lp + 1);
        }
    }
    names[layout.b()] = "B".into();
    names
}

fn identity_test(config: &RunConfig, ac: bool) -> Result<Produced> {
    let source = make_source(config)?;
    let replicas = Replicas::generated(source.as_ref(), config.n_replicas, replica_seed(config));
    let report = identity_report(
        replicas,
        config.s,
        config.r,
        &config.observable_spec(),
        config.draws_per_replica,
        seed(config).child(tag::DRAWS),
    )?;
    let residual = if ac { report.ac } else { report.gg };
    let z = residual.z_against(0.0);
    let tol = &config.tolerances;
    let pass = z.abs() <= tol.z_threshold && residual.value.abs() <= tol.residual_abs;
    let mut table = Table::new("terms.csv", output::TERMS_HEADER);
    for (name, term) in term_names(config.s).into_iter().zip(&report.terms) {
        table.push(vec![name, num(term.value), num(term.std_error)]);
    }
    table.push(vec![
        if ac { "ac_residual" } else { "gg_residual" }.into(),
        num(residual.value),
        num(residual.std_error),
    ]);
    Ok(Produced {
        status: Status::from_pass(pass),
        summary: json!({
            "residual": residual.value,
            "std_error": residual.std_error,
            "z": z,
        }),
        details: json!({
            "report": report,
            "observable": config.observable_spec(),
        }),
        tables: vec![table],
        blobs: Vec::new(),
    })
}

fn ultra_test(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let replicas = Replicas::generated(source.as_ref(), config.n_replicas, replica_seed(config));
    let fraction = ultrametric_violation(replicas, config.n_triples, 0.0, seed(config).child(tag::DRAWS))?;
    let mut table = Table::new("violation.csv", output::VIOLATION_HEADER);
    table.push(vec![
        config.n_replicas.to_string(),
        config.n_triples.to_string(),
        num(0.0),
        num(fraction),
    ]);
    Ok(Produced {
        status: Status::from_pass(fraction <= config.tolerances.ultrametric),
        summary: json!({ "fraction": fraction }),
        details: json!({ "tol": 0.0, "n_triples": config.n_triples }),
        tables: vec![table],
        blobs: Vec::new(),
    })
}

/// Slope of a linear `psi`.
fn linear_slope(psi: PsiSpec) -> Option<f64> {
    match psi {
        PsiSpec::Linear { lambda } => Some(lambda),
        PsiSpec::SmoothShifted { .. } => None,
    }
}

fn velocity(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let checkpoints = config.checkpoints();
    let report = velocity_experiment(
        source.as_ref(),
        config.psi,
        config.r,
        &checkpoints,
        config.n_replicas,
        config.top_ranks.min(source.dim()),
        config.dispersion_top_k.min(source.dim()),
        seed(config),
    )?;
    // linear psi = a kappa on a cascade: v = a^2 int (1 - q^r) dx
    let target = match (cascade(config), linear_slope(config.psi)) {
        (Some(x), Some(a)) => Some(a * a * x.moment_gap(config.r)),
        _ => None,
    };
    let mut vt = Table::new("velocity.csv", output::VELOCITY_HEADER);
    let mut dt = Table::new("dispersion.csv", output::DISPERSION_HEADER);
    for (c, &t) in checkpoints.iter().enumerate() {
        for (j, v) in report.velocity[c].iter().enumerate() {
            vt.push(vec![
                t.to_string(),
                report.ranks[j].to_string(),
                num(v.value),
                num(v.std_error),
                opt(target),
                opt(target.map(|tg| v.z_against(tg))),
            ]);
        }
        dt.push(vec![
            t.to_string(),
            num(report.dispersion[c].value),
            num(report.dispersion[c].std_error),
            num(report.weighted_mean[c].value),
            num(report.weighted_mean[c].std_error),
        ]);
    }
    let last = report.velocity.last().unwrap();
    let max_abs_z = target.map(|tg| last.iter().fold(0.0f64, |m, v| m.max(v.z_against(tg).abs())));
    let decreasing = report.dispersion.windows(2).all(|w| w[1].value < w[0].value);
    let status = match max_abs_z {
        Some(z) => Status::from_pass(z <= config.tolerances.z_threshold && decreasing),
        None => Status::Complete,
    };
    Ok(Produced {
        status,
        summary: json!({
            "target": target,
            "max_abs_z_last_checkpoint": max_abs_z,
            "dispersion_decreasing": decreasing,
            "last_velocities": last.iter().map(|v| v.value).collect::<Vec<_>>(),
        }),
        details: serde_json::to_value(&report)?,
        tables: vec![vt, dt],
        blobs: Vec::new(),
    })
}

fn pressure(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let replicas = Replicas::generated(source.as_ref(), config.n_replicas, replica_seed(config));
    let closed = |lambda: f64| match (cascade(config), linear_slope(config.psi)) {
        (Some(x), Some(a)) => Some((lambda * a).powi(2) / 2.0 * x.moment_gap(config.r)),
        _ => None,
    };
    let tol = &config.tolerances;
    let mut table = Table::new("pressure.csv", output::PRESSURE_HEADER);
    let mut pass = true;
    let mut reports = Vec::new();
    for (j, &lambda) in config.lambdas.iter().enumerate() {
        let rep = pressure_derivative_check(
            replicas,
            config.psi,
            config.r,
            lambda,
            config.eps,
            config.draws_per_replica,
            seed(config).path(&[tag::FIELD, j as u64]),
        )?;
        let target = closed(lambda);
        let z = target.map(|t| rep.pressure.z_against(t));
        let relative = target.filter(|&t| t != 0.0).map(|t| (rep.pressure.value - t).abs() / t.abs());
        let p = rep.pressure.value;
        pass &= p >= 0.0 && p <= rep.upper_bound + 1e-12 && rep.convex && rep.z.abs() <= tol.z_threshold;
        if let Some(z) = z {
            pass &= z.abs() <= tol.z_threshold;
        }
        if let Some(rel) = relative {
            pass &= rel <= tol.pressure_relative;
        }
        table.push(vec![
            num(lambda),
            num(p),
            num(rep.pressure.std_error),
            opt(target),
            num(rep.upper_bound),
            opt(z),
            opt(relative),
            num(rep.finite_difference.value),
            num(rep.finite_difference.std_error),
            num(rep.direct.value),
            num(rep.direct.std_error),
            num(rep.z),
            rep.convex.to_string(),
        ]);
        reports.push(rep);
    }
    Ok(Produced {
        status: Status::from_pass(pass),
        summary: json!({
            "lambdas": config.lambdas,
            "pressure": reports.iter().map(|r| r.pressure.value).collect::<Vec<_>>(),
            "closed_form": config.lambdas.iter().map(|&l| closed(l)).collect::<Vec<_>>(),
        }),
        details: serde_json::to_value(&reports)?,
        tables: vec![table],
        blobs: Vec::new(),
    })
}

fn clt_demo(config: &RunConfig) -> Result<Produced> {
    let source = make_source(config)?;
    let report = clt_reduction_experiment(
        source.as_ref(),
        config.h,
        config.lambda,
        config.r,
        config.steps,
        config.n_replicas,
        config.draws_per_replica,
        config.tolerances.family_level,
        seed(config),
    )?;
    let max_abs_z = report.comparison.max_abs_z;
    Ok(Produced {
        status: Status::from_pass(max_abs_z < config.tolerances.z_threshold),
        summary: json!({ "max_abs_z": max_abs_z, "beta": report.beta }),
        tables: vec![comparison_table(&report.comparison)],
        details: serde_json::to_value(&report)?,
        blobs: Vec::new(),
    })
}
