//! Random overlap structures: Ruelle probability cascades, the competitive
//! evolution map, and Monte Carlo estimators for the overlap identities.
//!
//! All randomness flows from explicit [`Seed`]s; every replica, field and
//! index draw uses its own stream addressed by a path below the master
//! seed, so results do not depend on the number of worker threads.

pub mod cdf;
pub mod error;
pub mod estimators;
pub mod evolution;
pub mod overlap;
pub mod psi;
pub mod replicas;
pub mod rng;
pub mod rost;
pub mod samplers;
pub mod stats;
pub mod weights;

pub use cdf::{EmpiricalCdf, OverlapCdf, ParametricCdf};
pub use error::{Error, Result};
pub use estimators::{EstimateWithError, ObservableSpec};
pub use evolution::{evolve_step, run_trajectory, Evolver, StepRecord, Trajectory};
pub use overlap::{Hierarchy, OverlapMatrix};
pub use psi::PsiSpec;
pub use replicas::Replicas;
pub use rng::{Seed, SimRng};
pub use rost::{Rost, MERGE_TOL};
pub use samplers::{build_rpc, FixedSource, RostSource, RpcSource};
pub use weights::RankedWeights;
