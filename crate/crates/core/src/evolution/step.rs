use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;
use crate::psi::PsiSpec;
use crate::rost::Rost;
use crate::samplers::field::FieldSampler;
use crate::weights::RankedWeights;

/// Bookkeeping of one application of the evolution map.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    /// `permutation[old_rank] = new_rank`.
    pub permutation: Vec<u32>,
    /// `psi(kappa)` of each particle, indexed by pre-step rank.
    pub increments: Vec<f64>,
    /// `log sum_j xi_j e^{psi(kappa_j)}`.
    pub log_normalizer: f64,
}

impl StepRecord {
    pub fn normalizer(&self) -> f64 {
        self.log_normalizer.exp()
    }

    /// Recomputes the post-step weights from the pre-step weights.
    pub fn apply(&self, before: &RankedWeights) -> Result<RankedWeights> {
        let n = before.len();
        if self.permutation.len() != n || self.increments.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.permutation.len(),
            });
        }
        let mut after = vec![f64::NAN; n];
        for (old, &w) in before.as_slice().iter().enumerate() {
            after[self.permutation[old] as usize] =
                tilted(w.ln(), self.increments[old], self.log_normalizer);
        }
        if after.iter().any(|v| v.is_nan()) {
            return Err(Error::DataIntegrity("permutation is not a bijection".into()));
        }
        Ok(RankedWeights::from_sorted_unchecked(after))
    }
}

#[inline]
fn tilted(log_weight: f64, increment: f64, log_normalizer: f64) -> f64 {
    (log_weight + increment - log_normalizer).exp()
}

/// Normalized, re-sorted exponential tilt of a weight sequence.
#[derive(Clone, Debug, PartialEq)]
pub struct Tilt {
    pub weights: RankedWeights,
    /// `order[new_rank] = old_rank`.
    pub order: Vec<usize>,
    pub log_normalizer: f64,
}

/// Tilts `masses` (any positive scale) by `e^{increments}` in shifted log
/// space, normalizes and sorts stably in decreasing order.
pub fn tilt(masses: &[f64], increments: &[f64]) -> Result<Tilt> {
    if masses.len() != increments.len() {
        return Err(Error::DimensionMismatch {
            expected: masses.len(),
            found: increments.len(),
        });
    }
    let logs: Vec<f64> = masses.iter().zip(increments).map(|(m, k)| m.ln() + k).collect();
    let shift = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !shift.is_finite() {
        return Err(Error::NumericalFailure(format!(
            "tilted weights degenerate (max log weight {shift})"
        )));
    }
    let sum: f64 = logs.iter().map(|l| (l - shift).exp()).sum();
    let log_normalizer = shift + sum.ln();
    let unsorted: Vec<f64> = logs.iter().map(|&l| (l - log_normalizer).exp()).collect();
    let mut order: Vec<usize> = (0..unsorted.len()).collect();
    order.sort_by(|&a, &b| unsorted[b].total_cmp(&unsorted[a]));
    let values = order.iter().map(|&i| unsorted[i]).collect();
    Ok(Tilt {
        weights: RankedWeights::from_sorted_unchecked(values),
        order,
        log_normalizer,
    })
}

/// The evolution map for a fixed label-space overlap matrix, with the field
/// sampler built once.
#[derive(Clone, Debug)]
pub struct Evolver {
    overlaps: Arc<OverlapMatrix>,
    sampler: Arc<FieldSampler>,
    psi: PsiSpec,
}

impl Evolver {
    pub fn new(overlaps: &Arc<OverlapMatrix>, psi: PsiSpec, r: u32) -> Result<Self> {
        psi.validate()?;
        Ok(Evolver {
            overlaps: overlaps.clone(),
            sampler: Arc::new(FieldSampler::new(overlaps, r)?),
            psi,
        })
    }

    pub fn for_rost(rost: &Rost, psi: PsiSpec, r: u32) -> Result<Self> {
        Self::new(rost.label_overlaps(), psi, r)
    }

    pub fn psi(&self) -> PsiSpec {
        self.psi
    }

    pub fn sampler(&self) -> &FieldSampler {
        &self.sampler
    }

    fn check(&self, rost: &Rost) -> Result<()> {
        let same = Arc::ptr_eq(&self.overlaps, rost.label_overlaps())
            || *self.overlaps == **rost.label_overlaps();
        if !same {
            return Err(Error::DataIntegrity(
                "ROSt overlaps differ from the evolver's overlap matrix".into(),
            ));
        }
        Ok(())
    }

    /// Fresh increments `psi(kappa)` indexed by the current ranks.
    pub fn draw_increments<R: Rng + ?Sized>(&self, rost: &Rost, rng: &mut R) -> Vec<f64> {
        let n = rost.dim();
        if self.psi.is_constant() {
            return vec![self.psi.eval(0.0); n];
        }
        let mut field = vec![0.0; n];
        self.sampler.sample_into(rng, &mut field);
        rost.labels()
            .iter()
            .map(|&l| self.psi.eval(field[l as usize]))
            .collect()
    }

    /// Applies the map with the given increments (indexed by current rank).
    pub fn apply(&self, rost: &Rost, increments: Vec<f64>) -> Result<(Rost, StepRecord)> {
        self.check(rost)?;
        let n = rost.dim();
        if increments.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: increments.len(),
            });
        }
        if self.psi.is_constant() {
            let log_normalizer = increments.first().copied().unwrap_or(0.0);
            let record = StepRecord {
                permutation: (0..n as u32).collect(),
                increments,
                log_normalizer,
            };
            return Ok((rost.clone(), record));
        }
        let t = tilt(rost.weights().as_slice(), &increments)?;
        let mut permutation = vec![0u32; n];
        for (new, &old) in t.order.iter().enumerate() {
            permutation[old] = new as u32;
        }
        let labels = t.order.iter().map(|&old| rost.labels()[old]).collect();
        let next = Rost::from_parts_unchecked(t.weights, rost.label_overlaps().clone(), labels);
        Ok((
            next,
            StepRecord {
                permutation,
                increments,
                log_normalizer: t.log_normalizer,
            },
        ))
    }

    pub fn step<R: Rng + ?Sized>(&self, rost: &Rost, rng: &mut R) -> Result<(Rost, StepRecord)> {
        let increments = self.draw_increments(rost, rng);
        self.apply(rost, increments)
    }
}

/// One application of the evolution map with a fresh field.
pub fn evolve_step<R: Rng + ?Sized>(
    rost: &Rost,
    psi: PsiSpec,
    r: u32,
    rng: &mut R,
) -> Result<(Rost, StepRecord)> {
    Evolver::for_rost(rost, psi, r)?.step(rost, rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cdf::ParametricCdf;
    use crate::rng::Seed;
    use crate::samplers::rpc::build_rpc;

    fn rpc(n: usize, seed: u64) -> Rost {
        let x = ParametricCdf::for_cascade(vec![(0.3, 0.25), (0.7, 0.25)]).unwrap();
        build_rpc(&x, n, &mut Seed(seed).rng()).unwrap()
    }

    #[test]
    fn zero_psi_is_identity() {
        let rost = rpc(32, 1);
        let (next, rec) = evolve_step(&rost, PsiSpec::zero(), 1, &mut Seed(2).rng()).unwrap();
        assert_eq!(next, rost);
        assert_eq!(rec.log_normalizer, 0.0);
        assert!(rec.increments.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_particle_hand_example() {
        let w = RankedWeights::new(vec![0.6, 0.4]).unwrap();
        let rost = Rost::new(w, OverlapMatrix::identity(2)).unwrap();
        let ev = Evolver::for_rost(&rost, PsiSpec::linear(1.0), 1).unwrap();
        let (next, rec) = ev.apply(&rost, vec![0.0, 1.0]).unwrap();
        let e = std::f64::consts::E;
        let big = 0.4 * e / (0.6 + 0.4 * e);
        assert!((next.weights().as_slice()[0] - big).abs() < 1e-15);
        assert!((next.weights().as_slice()[1] - (1.0 - big)).abs() < 1e-15);
        assert!((big - 0.6444).abs() < 1e-4);
        assert_eq!(rec.permutation, vec![1, 0]);
        assert_eq!(next.labels(), &[1, 0]);
    }

    #[test]
    fn record_reproduces_weights_exactly() {
        let rost = rpc(64, 3);
        let (next, rec) = evolve_step(&rost, PsiSpec::linear(0.8), 2, &mut Seed(4).rng()).unwrap();
        assert_eq!(&rec.apply(rost.weights()).unwrap(), next.weights());
        next.validate().unwrap();
    }

    #[test]
    fn spectrum_and_entries_are_preserved() {
        let rost = rpc(24, 5);
        let (next, _) = evolve_step(&rost, PsiSpec::linear(2.0), 1, &mut Seed(6).rng()).unwrap();
        let (a, b) = (rost.rank_overlaps(), next.rank_overlaps());
        let mut ea: Vec<f64> = a.entries().to_vec();
        let mut eb: Vec<f64> = b.entries().to_vec();
        ea.sort_by(f64::total_cmp);
        eb.sort_by(f64::total_cmp);
        assert_eq!(ea, eb);
        for (x, y) in a.sorted_eigenvalues().iter().zip(b.sorted_eigenvalues()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn tilt_commutes_with_normalization() {
        let rost = rpc(50, 7);
        let ev = Evolver::for_rost(&rost, PsiSpec::linear(1.3), 1).unwrap();
        let inc = ev.draw_increments(&rost, &mut Seed(8).rng());
        let a = tilt(rost.weights().as_slice(), &inc).unwrap();
        let scaled: Vec<f64> = rost.weights().as_slice().iter().map(|w| w * 37.5).collect();
        let b = tilt(&scaled, &inc).unwrap();
        assert_eq!(a.order, b.order);
        for (x, y) in a.weights.as_slice().iter().zip(b.weights.as_slice()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn huge_increments_do_not_overflow() {
        let w = RankedWeights::new(vec![0.5, 0.3, 0.2]).unwrap();
        let t = tilt(w.as_slice(), &[2000.0, 2001.0, -5000.0]).unwrap();
        assert!(t.weights.as_slice().iter().all(|v| v.is_finite()));
        assert_eq!(t.order, vec![1, 0, 2]);
        assert!(tilt(&[0.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn ties_keep_prior_rank() {
        let w = RankedWeights::new(vec![0.25; 4]).unwrap();
        let t = tilt(w.as_slice(), &[0.0; 4]).unwrap();
        assert_eq!(t.order, vec![0, 1, 2, 3]);
    }
}
