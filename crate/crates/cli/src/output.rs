//! Result files of a run.
//!
//! Every run directory holds the experiment's CSV tables, `result.json`
//! (the structured result record) and `manifest.json`. CSV files have one
//! header line; all quantities are dimensionless.
//!
//! | experiment | file              | columns |
//! |------------|-------------------|---------|
//! | sample-rpc | `replicas.csv`    | `replica,sum_xi2,sum_xi3,xi1,xi2,q12` |
//! | sample-rpc | `overlap_cdf.csv` | `q,cdf,std_error,target,z` |
//! | evolve     | `velocities.csv`  | `rank,label,weight,velocity` |
//! | evolve     | `trajectory.jsonl`| one record per step, see `rost_core::evolution::dump` |
//! | qs-test, clt-demo | `observables.csv` | `observable,reference,reference_se,candidate,candidate_se,z` |
//! | gg-test, ac-test  | `terms.csv`  | `term,value,std_error` |
//! | ultra-test | `violation.csv`   | `n_replicas,n_triples,tol,fraction` |
//! | velocity   | `velocity.csv`    | `steps,rank,velocity,std_error,target,z` |
//! | velocity   | `dispersion.csv`  | `steps,dispersion,std_error,weighted_mean,weighted_mean_se` |
//! | pressure   | `pressure.csv`    | `lambda,pressure,std_error,closed_form,upper_bound,z,relative_error,derivative_fd,derivative_fd_se,derivative_direct,derivative_direct_se,derivative_z,convex` |
//!
//! `target`, `closed_form`, `z` and `relative_error` are empty when no
//! closed form applies. Numbers use Rust's shortest round-trip formatting.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const REPLICAS_HEADER: &[&str] = &["replica", "sum_xi2", "sum_xi3", "xi1", "xi2", "q12"];
pub const OVERLAP_CDF_HEADER: &[&str] = &["q", "cdf", "std_error", "target", "z"];
pub const VELOCITIES_HEADER: &[&str] = &["rank", "label", "weight", "velocity"];
pub const OBSERVABLES_HEADER: &[&str] =
    &["observable", "reference", "reference_se", "candidate", "candidate_se", "z"];
pub const TERMS_HEADER: &[&str] = &["term", "value", "std_error"];
pub const VIOLATION_HEADER: &[&str] = &["n_replicas", "n_triples", "tol", "fraction"];
pub const VELOCITY_HEADER: &[&str] = &["steps", "rank", "velocity", "std_error", "target", "z"];
pub const DISPERSION_HEADER: &[&str] =
    &["steps", "dispersion", "std_error", "weighted_mean", "weighted_mean_se"];
pub const PRESSURE_HEADER: &[&str] = &[
    "lambda",
    "pressure",
    "std_error",
    "closed_form",
    "upper_bound",
    "z",
    "relative_error",
    "derivative_fd",
    "derivative_fd_se",
    "derivative_direct",
    "derivative_direct_se",
    "derivative_z",
    "convex",
];

/// A CSV table held in memory until the run finishes.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(name: &'static str, header: &'static [&'static str]) -> Self {
        Table {
            name,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len(), "{}", self.name);
        self.rows.push(row);
    }
}

/// Formats a number for a table cell.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// An optional number; empty when absent.
pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// A file written by a run, with its digest.
#[derive(Clone, Debug, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub sha256: String,
}

pub fn write_table(dir: &Path, table: &Table) -> Result<PathBuf> {
    let path = dir.join(table.name);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn file_record(path: &Path) -> Result<FileRecord> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(FileRecord {
        name: path.file_name().unwrap().to_string_lossy().into_owned(),
        sha256: hex::encode(Sha256::digest(&bytes)),
    })
}
