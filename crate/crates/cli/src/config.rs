//! Run configuration: JSON ingestion, validation and the canonical hash.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use rost_core::estimators::{ObservableForm, ObservableSpec};
use rost_core::{ParametricCdf, PsiSpec};

/// The experiments, one per subcommand.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SampleRpc,
    Evolve,
    QsTest,
    GgTest,
    AcTest,
    UltraTest,
    Velocity,
    Pressure,
    CltDemo,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::SampleRpc => "sample-rpc",
            Experiment::Evolve => "evolve",
            Experiment::QsTest => "qs-test",
            Experiment::GgTest => "gg-test",
            Experiment::AcTest => "ac-test",
            Experiment::UltraTest => "ultra-test",
            Experiment::Velocity => "velocity",
            Experiment::Pressure => "pressure",
            Experiment::CltDemo => "clt-demo",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where replicas come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SourceKind {
    /// Cascades with parameter `x_atoms` and `n_atoms` particles.
    Rpc,
    /// Fixed geometric weights `xi_i ∝ ratio^i` with identity overlaps.
    Geometric,
    /// Fixed three-particle non-ultrametric structure.
    Planted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Overlap closeness for counting two particles as identical.
    pub merge: f64,
    /// Two-sided z bound of single-statistic checks.
    pub z_threshold: f64,
    /// Family-wise level of multi-observable comparisons.
    pub family_level: f64,
    /// Bound on the absolute value of identity residuals.
    pub residual_abs: f64,
    /// Largest admissible ultrametric violation fraction.
    pub ultrametric: f64,
    /// Bound on the relative pressure error.
    pub pressure_relative: f64,
    /// Bound on absolute errors of sampled laws against their targets.
    pub law_abs: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            merge: rost_core::MERGE_TOL,
            z_threshold: 3.0,
            family_level: 0.01,
            residual_abs: 0.02,
            ultrametric: 0.0,
            pressure_relative: 0.02,
            law_abs: 0.02,
        }
    }
}

/// One experiment run. Every field except `experiment` has a default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub experiment: Option<Experiment>,
    pub seed: u64,
    pub source: SourceKind,
    /// Truncation size `N` of cascade replicas.
    pub n_atoms: usize,
    pub n_replicas: usize,
    /// Index draws, fields or sampled pairs per replica (`K`).
    pub draws_per_replica: usize,
    /// Cascade parameter as `[q, mass]` pairs below `q = 1`.
    pub x_atoms: Vec<(f64, f64)>,
    /// Ratio of the geometric source.
    pub geometric_ratio: f64,
    pub psi: PsiSpec,
    pub r: u32,
    /// Number of evolution steps `T`.
    #[serde(alias = "T")]
    pub steps: usize,
    pub s: usize,
    /// `F_s`; defaults to `q_12`.
    pub observable: Option<ObservableForm>,
    /// Horizons of the velocity experiment; defaults to `[steps]`.
    pub checkpoints: Vec<usize>,
    pub top_ranks: usize,
    pub dispersion_top_k: usize,
    /// Tilt strengths of the pressure experiment.
    pub lambdas: Vec<f64>,
    /// Half-width of the pressure derivative check.
    pub eps: f64,
    /// Shift of the smooth increments in clt-demo.
    pub h: f64,
    /// Target linear slope in clt-demo.
    pub lambda: f64,
    /// Sampled triples per replica in ultra-test.
    pub n_triples: usize,
    pub tolerances: Tolerances,
    pub output_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: None,
            seed: 0,
            source: SourceKind::Rpc,
            n_atoms: 512,
            n_replicas: 2000,
            draws_per_replica: 64,
            x_atoms: vec![(0.5, 0.5)],
            geometric_ratio: 0.5,
            psi: PsiSpec::linear(0.5),
            r: 1,
            steps: 64,
            s: 2,
            observable: None,
            checkpoints: Vec::new(),
            top_ranks: 5,
            dispersion_top_k: 16,
            lambdas: vec![0.5, 1.0, 1.5],
            eps: 0.01,
            h: 1.0,
            lambda: 0.5,
            n_triples: 64,
            tolerances: Tolerances::default(),
            output_path: None,
        }
    }
}

/// A configuration problem located by its path in the document.
#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid {
            path: path.to_string(),
            message: message.into(),
        }
    }
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        ConfigError::at(&path, format!("{inner}"))
    })?;
    config.validate()?;
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.cascade_cdf()?;
        if self.n_atoms < 2 {
            return Err(ConfigError::at("n_atoms", format!("must be >= 2, got {}", self.n_atoms)));
        }
        if self.n_replicas == 0 {
            return Err(ConfigError::at("n_replicas", "must be positive"));
        }
        if self.draws_per_replica == 0 {
            return Err(ConfigError::at("draws_per_replica", "must be positive"));
        }
        if !(self.geometric_ratio > 0.0 && self.geometric_ratio < 1.0) {
            return Err(ConfigError::at("geometric_ratio", "must lie in (0, 1)"));
        }
        self.psi.validate().map_err(|e| ConfigError::at("psi", e.to_string()))?;
        if self.r == 0 {
            return Err(ConfigError::at("r", "must be a positive integer"));
        }
        if matches!(self.experiment, Some(Experiment::GgTest | Experiment::AcTest)) && self.s < 2 {
            return Err(ConfigError::at("s", format!("s must be ≥ 2, got {}", self.s)));
        }
        if self.s == 0 {
            return Err(ConfigError::at("s", "must be positive"));
        }
        self.observable_spec()
            .validate()
            .map_err(|e| ConfigError::at("observable", e.to_string()))?;
        if self.checkpoints.windows(2).any(|w| w[0] >= w[1]) || self.checkpoints.first() == Some(&0) {
            return Err(ConfigError::at("checkpoints", "must be positive and strictly increasing"));
        }
        if self.lambdas.iter().any(|l| !l.is_finite()) {
            return Err(ConfigError::at("lambdas", "must be finite"));
        }
        if !(self.eps > 1e-4 && self.eps < 1e-1) {
            return Err(ConfigError::at("eps", "must lie in (1e-4, 1e-1)"));
        }
        if !self.h.is_finite() || !self.lambda.is_finite() {
            return Err(ConfigError::at("h", "h and lambda must be finite"));
        }
        let t = &self.tolerances;
        if !(t.family_level > 0.0 && t.family_level < 1.0) {
            return Err(ConfigError::at("tolerances.family_level", "must lie in (0, 1)"));
        }
        for (name, v) in [
            ("merge", t.merge),
            ("z_threshold", t.z_threshold),
            ("residual_abs", t.residual_abs),
            ("ultrametric", t.ultrametric),
            ("pressure_relative", t.pressure_relative),
            ("law_abs", t.law_abs),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(ConfigError::at(&format!("tolerances.{name}"), "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    /// The cascade parameter; masses must sum to a value in `(0, 1)`.
    pub fn cascade_cdf(&self) -> Result<ParametricCdf, ConfigError> {
        if self.x_atoms.is_empty() {
            return Err(ConfigError::at("x_atoms", "needs at least one atom"));
        }
        for (i, &(q, m)) in self.x_atoms.iter().enumerate() {
            if !(0.0..1.0).contains(&q) {
                return Err(ConfigError::at(&format!("x_atoms[{i}][0]"), format!("q = {q} outside [0, 1)")));
            }
            if !(m > 0.0) {
                return Err(ConfigError::at(&format!("x_atoms[{i}][1]"), format!("mass {m} must be positive")));
            }
            if i > 0 && self.x_atoms[i - 1].0 >= q {
                return Err(ConfigError::at(&format!("x_atoms[{i}][0]"), "q must be strictly increasing"));
            }
        }
        let total: f64 = self.x_atoms.iter().map(|a| a.1).sum();
        if total >= 1.0 {
            return Err(ConfigError::at(
                "x_atoms",
                format!("x(1⁻) must be < 1, masses sum to {total}"),
            ));
        }
        ParametricCdf::for_cascade(self.x_atoms.clone()).map_err(|e| ConfigError::at("x_atoms", e.to_string()))
    }

    pub fn observable_spec(&self) -> ObservableSpec {
        match &self.observable {
            Some(form) => ObservableSpec {
                s: self.s,
                form: form.clone(),
            },
            None => ObservableSpec::monomial(self.s, (1, 2), 1),
        }
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        if self.checkpoints.is_empty() {
            vec![self.steps]
        } else {
            self.checkpoints.clone()
        }
    }

    /// Sorted-key JSON of the configuration with defaults filled in. The
    /// output path does not affect results and is left out.
    pub fn canonical_json(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let serde_json::Value::Object(map) = &mut value {
            map.remove("output_path");
        }
        // serde_json maps are ordered by key
        serde_json::to_string(&value).expect("value serializes")
    }

    /// Hex SHA-256 of [`RunConfig::canonical_json`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
