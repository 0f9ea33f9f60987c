//! Sampled expectations over replicas, overlap distribution functions, the
//! pressure, and residual statistics for the overlap identities,
//! ultrametricity and quasi-stationarity.

pub mod bootstrap;
pub mod identities;
pub mod observable;
pub mod pressure;
pub mod sampled;
pub mod stationarity;
pub mod velocity;

pub use bootstrap::{EstimateWithError, ReplicaTable, DEFAULT_RESAMPLES, MIN_RESAMPLES};
pub use identities::{ac_residual, gg_residual, identity_report, identity_terms, IdentityReport, TermLayout};
pub use observable::{Condition, Direction, MonomialFactor, ObservableForm, ObservableSpec};
pub use pressure::{log_g, pressure, pressure_curve, pressure_derivative_check, PressureDerivativeReport};
pub use sampled::{
    estimate_overlap_cdf, sampled_expectation, sampled_expectation_with, ultrametric_violation,
    EstimatorOptions, DEFAULT_DRAW_BUDGET,
};
pub use stationarity::{
    clt_increment_variance, clt_reduction_experiment, observable_grid, observable_names,
    observable_vector, quasi_stationarity_test, CltReport, ComparisonReport,
};
pub use velocity::{velocity_experiment, VelocityReport};
