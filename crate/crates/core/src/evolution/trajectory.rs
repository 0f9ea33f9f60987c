use rand::Rng;

use crate::error::{Error, Result};
use crate::evolution::step::{Evolver, StepRecord};
use crate::psi::PsiSpec;
use crate::rost::Rost;

/// A forward trajectory of the evolution map.
///
/// `cumulative[label]` is the running sum of the increments received by
/// that particle, independent of the ranks it occupied.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    initial: Rost,
    steps: Vec<StepRecord>,
    final_rost: Rost,
    cumulative: Vec<f64>,
    t: usize,
}

impl Trajectory {
    pub fn initial(&self) -> &Rost {
        &self.initial
    }

    /// Recorded steps; empty when the run kept only the summary.
    pub fn steps(&self) -> &[StepRecord] {
        &self.steps
    }

    pub fn final_rost(&self) -> &Rost {
        &self.final_rost
    }

    pub fn cumulative_increments(&self) -> &[f64] {
        &self.cumulative
    }

    /// Number of steps `T`.
    pub fn len(&self) -> usize {
        self.t
    }

    pub fn is_empty(&self) -> bool {
        self.t == 0
    }

    /// `(1/T) * cumulative[label at rank]` for the 1-based `rank` after the
    /// last step.
    pub fn past_velocity(&self, rank: usize) -> Result<f64> {
        let n = self.final_rost.dim();
        if rank == 0 || rank > n {
            return Err(Error::invalid(format!("rank {rank} outside 1..={n}")));
        }
        if self.t == 0 {
            return Err(Error::invalid("trajectory has no steps"));
        }
        let label = self.final_rost.labels()[rank - 1] as usize;
        Ok(self.cumulative[label] / self.t as f64)
    }

    /// Past velocities of all ranks, 0-based.
    pub fn velocities(&self) -> Vec<f64> {
        let t = self.t.max(1) as f64;
        self.final_rost
            .labels()
            .iter()
            .map(|&l| self.cumulative[l as usize] / t)
            .collect()
    }

    /// `sum_i xi_i(T) v_i(T)` over all ranks.
    pub fn weighted_mean_increment(&self) -> f64 {
        self.final_rost
            .weights()
            .as_slice()
            .iter()
            .zip(self.velocities())
            .map(|(w, v)| w * v)
            .sum()
    }

    /// `sum over the top_k ranks of xi_i (v_i - <v>)^2`.
    pub fn velocity_dispersion(&self, top_k: usize) -> Result<f64> {
        let n = self.final_rost.dim();
        if top_k == 0 || top_k > n {
            return Err(Error::invalid(format!("top_k = {top_k} outside 1..={n}")));
        }
        let mean = self.weighted_mean_increment();
        Ok(self.final_rost.weights().as_slice()[..top_k]
            .iter()
            .zip(self.velocities())
            .map(|(w, v)| w * (v - mean) * (v - mean))
            .sum())
    }

    /// Replays the recorded steps and checks label conservation, the weight
    /// bookkeeping and the cumulative increments.
    pub fn verify(&self) -> Result<()> {
        if self.steps.len() != self.t {
            return Err(Error::invalid("steps were not recorded"));
        }
        let n = self.initial.dim();
        let mut labels = self.initial.labels().to_vec();
        let mut weights = self.initial.weights().clone();
        let mut sums = vec![0.0; n];
        for (t, step) in self.steps.iter().enumerate() {
            weights = step.apply(&weights)?;
            let mut next = vec![u32::MAX; n];
            for (old, &new) in step.permutation.iter().enumerate() {
                sums[labels[old] as usize] += step.increments[old];
                next[new as usize] = labels[old];
            }
            if next.contains(&u32::MAX) {
                return Err(Error::DataIntegrity(format!("step {t}: permutation not a bijection")));
            }
            labels = next;
        }
        if labels != self.final_rost.labels() {
            return Err(Error::DataIntegrity("labels diverge from the final ROSt".into()));
        }
        if &weights != self.final_rost.weights() {
            return Err(Error::DataIntegrity("replayed weights differ".into()));
        }
        if sums != self.cumulative {
            return Err(Error::DataIntegrity("cumulative increments differ".into()));
        }
        Ok(())
    }
}

impl Evolver {
    /// Runs `steps` applications of the map, calling `observe` after each
    /// with the step count, the current ROSt and the cumulative increments.
    pub fn run_observed<R: Rng + ?Sized>(
        &self,
        rost: &Rost,
        steps: usize,
        record: bool,
        rng: &mut R,
        mut observe: impl FnMut(usize, &Rost, &[f64]),
    ) -> Result<Trajectory> {
        if steps == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        let mut cumulative = vec![0.0; rost.dim()];
        let mut records = Vec::with_capacity(if record { steps } else { 0 });
        let mut current = rost.clone();
        for t in 1..=steps {
            let (next, rec) = self.step(&current, rng)?;
            for (rank, &inc) in rec.increments.iter().enumerate() {
                cumulative[current.labels()[rank] as usize] += inc;
            }
            current = next;
            observe(t, &current, &cumulative);
            if record {
                records.push(rec);
            }
        }
        Ok(Trajectory {
            initial: rost.clone(),
            steps: records,
            final_rost: current,
            cumulative,
            t: steps,
        })
    }

    pub fn run<R: Rng + ?Sized>(&self, rost: &Rost, steps: usize, rng: &mut R) -> Result<Trajectory> {
        self.run_observed(rost, steps, true, rng, |_, _, _| {})
    }

    /// Summary trajectories (steps not recorded) at each checkpoint of one
    /// run, in increasing order.
    pub fn run_checkpoints<R: Rng + ?Sized>(
        &self,
        rost: &Rost,
        checkpoints: &[usize],
        rng: &mut R,
    ) -> Result<Vec<Trajectory>> {
        if checkpoints.is_empty() || checkpoints.windows(2).any(|w| w[0] >= w[1]) || checkpoints[0] == 0 {
            return Err(Error::invalid("checkpoints must be positive and strictly increasing"));
        }
        let mut snapshots = Vec::with_capacity(checkpoints.len());
        let last = *checkpoints.last().unwrap();
        let mut next = 0;
        self.run_observed(rost, last, false, rng, |t, current, cumulative| {
            if next < checkpoints.len() && t == checkpoints[next] {
                snapshots.push(Trajectory {
                    initial: rost.clone(),
                    steps: Vec::new(),
                    final_rost: current.clone(),
                    cumulative: cumulative.to_vec(),
                    t,
                });
                next += 1;
            }
        })?;
        Ok(snapshots)
    }
}

/// `T` steps of the evolution map with independent fields.
pub fn run_trajectory<R: Rng + ?Sized>(
    rost: &Rost,
    psi: PsiSpec,
    r: u32,
    steps: usize,
    rng: &mut R,
) -> Result<Trajectory> {
    Evolver::for_rost(rost, psi, r)?.run(rost, steps, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::ParametricCdf;
    use crate::evolution::step::evolve_step;
    use crate::overlap::OverlapMatrix;
    use crate::rng::Seed;
    use crate::samplers::rpc::build_rpc;
    use crate::weights::RankedWeights;

    fn rpc(n: usize, seed: u64) -> Rost {
        let x = ParametricCdf::one_level(0.5, 0.5).unwrap();
        build_rpc(&x, n, &mut Seed(seed).rng()).unwrap()
    }

    #[test]
    fn single_step_matches_evolve_step() {
        let rost = rpc(32, 1);
        let psi = PsiSpec::linear(1.0);
        let traj = run_trajectory(&rost, psi, 1, 1, &mut Seed(2).rng()).unwrap();
        let (next, rec) = evolve_step(&rost, psi, 1, &mut Seed(2).rng()).unwrap();
        assert_eq!(traj.final_rost(), &next);
        assert_eq!(traj.steps(), &[rec.clone()]);
        for rank in 1..=32 {
            let old = rec.permutation.iter().position(|&p| p as usize == rank - 1).unwrap();
            assert_eq!(traj.past_velocity(rank).unwrap(), rec.increments[old]);
        }
    }

    #[test]
    fn zero_psi_keeps_everything() {
        let rost = rpc(16, 3);
        let traj = run_trajectory(&rost, PsiSpec::zero(), 1, 25, &mut Seed(4).rng()).unwrap();
        assert_eq!(traj.final_rost(), &rost);
        assert!(traj.cumulative_increments().iter().all(|&c| c == 0.0));
        assert_eq!(traj.weighted_mean_increment(), 0.0);
        assert_eq!(traj.velocity_dispersion(16).unwrap(), 0.0);
        for rank in 1..=16 {
            assert_eq!(traj.past_velocity(rank).unwrap(), 0.0);
        }
    }

    #[test]
    fn bookkeeping_replays_exactly() {
        let rost = rpc(40, 5);
        let traj = run_trajectory(&rost, PsiSpec::linear(0.7), 2, 30, &mut Seed(6).rng()).unwrap();
        traj.verify().unwrap();
        let mut labels = traj.final_rost().labels().to_vec();
        labels.sort_unstable();
        assert_eq!(labels, (0..40).collect::<Vec<u32>>());
    }

    #[test]
    fn two_particle_weighted_mean_expansion() {
        let w = RankedWeights::new(vec![0.7, 0.3]).unwrap();
        let rost = Rost::new(w, OverlapMatrix::identity(2)).unwrap();
        let traj = run_trajectory(&rost, PsiSpec::linear(1.5), 1, 1, &mut Seed(7).rng()).unwrap();
        let rec = &traj.steps()[0];
        let xi = traj.final_rost().weights().as_slice();
        let inv = |new: usize| rec.permutation.iter().position(|&p| p as usize == new).unwrap();
        let direct = xi[0] * rec.increments[inv(0)] + xi[1] * rec.increments[inv(1)];
        assert!((traj.weighted_mean_increment() - direct).abs() < 1e-15);
    }

    #[test]
    fn checkpoints_match_separate_runs() {
        let rost = rpc(20, 8);
        let ev = Evolver::for_rost(&rost, PsiSpec::linear(1.0), 1).unwrap();
        let snaps = ev.run_checkpoints(&rost, &[3, 10], &mut Seed(9).rng()).unwrap();
        let full = ev.run(&rost, 10, &mut Seed(9).rng()).unwrap();
        let short = ev.run(&rost, 3, &mut Seed(9).rng()).unwrap();
        assert_eq!(snaps[1].velocities(), full.velocities());
        assert_eq!(snaps[0].velocities(), short.velocities());
        assert_eq!(snaps[1].final_rost(), full.final_rost());
    }

    #[test]
    fn rank_out_of_range() {
        let rost = rpc(8, 10);
        let traj = run_trajectory(&rost, PsiSpec::linear(1.0), 1, 2, &mut Seed(1).rng()).unwrap();
        assert!(traj.past_velocity(0).is_err());
        assert!(traj.past_velocity(9).is_err());
        assert!(traj.velocity_dispersion(9).is_err());
    }

    #[test]
    fn non_stationary_seed_dispersion_is_finite() {
        let w = RankedWeights::geometric(64, 0.5).unwrap();
        let rost = Rost::new(w, OverlapMatrix::identity(64)).unwrap();
        let traj = run_trajectory(&rost, PsiSpec::linear(1.0), 1, 50, &mut Seed(2).rng()).unwrap();
        assert!(traj.velocity_dispersion(10).unwrap().is_finite());
    }
}
