//! Line-delimited JSON dump of a recorded trajectory.
//!
//! One object per step, in order:
//!
//! | field            | type          | meaning                                          |
//! |------------------|---------------|--------------------------------------------------|
//! | `step`           | integer       | 1-based step index                               |
//! | `log_normalizer` | number        | `log sum_j xi_j e^{psi(kappa_j)}`                |
//! | `permutation`    | integer array | `permutation[old_rank] = new_rank`, 0-based      |
//! | `top_weights`    | number array  | largest `k` weights after the step               |
//! | `top_increments` | number array  | increments of pre-step ranks `0..k`              |
//! | `top_labels`     | integer array | labels at ranks `0..k` after the step            |

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::trajectory::Trajectory;

#[derive(Serialize)]
struct DumpRecord<'a> {
    step: usize,
    log_normalizer: f64,
    permutation: &'a [u32],
    top_weights: &'a [f64],
    top_increments: &'a [f64],
    top_labels: &'a [u32],
}

/// Writes one JSON line per recorded step with the top `k` entries.
pub fn write_jsonl<W: Write>(traj: &Trajectory, top_k: usize, mut out: W) -> Result<()> {
    if traj.steps().len() != traj.len() {
        return Err(Error::invalid("trajectory steps were not recorded"));
    }
    let k = top_k.min(traj.initial().dim());
    let mut weights = traj.initial().weights().clone();
    let mut labels = traj.initial().labels().to_vec();
    let io = |e: std::io::Error| Error::DataIntegrity(format!("dump write failed: {e}"));
    for (t, step) in traj.steps().iter().enumerate() {
        weights = step.apply(&weights)?;
        let mut next = labels.clone();
        for (old, &new) in step.permutation.iter().enumerate() {
            next[new as usize] = labels[old];
        }
        labels = next;
        let rec = DumpRecord {
            step: t + 1,
            log_normalizer: step.log_normalizer,
            permutation: &step.permutation,
            top_weights: &weights.as_slice()[..k],
            top_increments: &step.increments[..k],
            top_labels: &labels[..k],
        };
        serde_json::to_writer(&mut out, &rec)
            .map_err(|e| Error::DataIntegrity(format!("dump serialization failed: {e}")))?;
        out.write_all(b"\n").map_err(io)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::ParametricCdf;
    use crate::evolution::trajectory::run_trajectory;
    use crate::psi::PsiSpec;
    use crate::rng::Seed;
    use crate::samplers::rpc::build_rpc;

    #[test]
    fn one_line_per_step_with_schema() {
        let x = ParametricCdf::one_level(0.5, 0.5).unwrap();
        let rost = build_rpc(&x, 12, &mut Seed(1).rng()).unwrap();
        let traj = run_trajectory(&rost, PsiSpec::linear(1.0), 1, 4, &mut Seed(2).rng()).unwrap();
        let mut buf = Vec::new();
        write_jsonl(&traj, 3, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        let last: serde_json::Value = serde_json::from_str(lines[3]).unwrap();
        assert_eq!(last["step"], 4);
        assert_eq!(last["permutation"].as_array().unwrap().len(), 12);
        assert_eq!(last["top_weights"].as_array().unwrap().len(), 3);
        let w0 = last["top_weights"][0].as_f64().unwrap();
        assert_eq!(w0, traj.final_rost().weights().as_slice()[0]);
        assert_eq!(last["top_labels"][0].as_u64().unwrap() as u32, traj.final_rost().labels()[0]);
    }
}
