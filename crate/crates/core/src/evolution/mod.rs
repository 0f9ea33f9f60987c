//! The competitive evolution map, multi-step trajectories with identity
//! tracking, and past velocities.

pub mod dump;
pub mod step;
pub mod trajectory;

pub use dump::write_jsonl;
pub use step::{evolve_step, tilt, Evolver, StepRecord, Tilt};
pub use trajectory::{run_trajectory, Trajectory};
