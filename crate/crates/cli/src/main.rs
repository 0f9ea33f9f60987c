use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use rost_cli::{load_config, run_experiment, Experiment, RunConfig};

/// Monte Carlo experiments on random overlap structures.
#[derive(Parser, Debug)]
#[command(name = "rost", version)]
struct Cli {
    /// Experiment to run.
    #[arg(value_enum)]
    experiment: Experiment,

    /// JSON run configuration; built-in defaults when absent.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Master seed, overriding the configuration.
    #[arg(long)]
    seed: Option<u64>,

    /// Worker threads; all cores when absent. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,

    /// Directory for result files; defaults to `output_path` from the
    /// configuration, then `rost-out/<experiment>`.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<i32> {
    let mut config = match &cli.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    match config.experiment {
        Some(e) if e != cli.experiment => {
            bail!("experiment: configuration names {e} but the command is {}", cli.experiment)
        }
        _ => config.experiment = Some(cli.experiment),
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    config.validate()?;
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let dir = cli
        .output_dir
        .or_else(|| config.output_path.clone())
        .unwrap_or_else(|| PathBuf::from("rost-out").join(cli.experiment.name()));
    let outcome = run_experiment(&config, &dir)?;
    println!(
        "{} {} seed={} hash={} -> {}",
        cli.experiment,
        serde_json::to_string(&outcome.status)?.trim_matches('"'),
        config.seed,
        outcome.manifest.config_hash,
        dir.display()
    );
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
