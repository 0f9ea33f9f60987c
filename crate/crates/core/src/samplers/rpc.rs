use rand::Rng;

use crate::cdf::ParametricCdf;
use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;
use crate::rng::Seed;
use crate::rost::Rost;
use crate::samplers::coalescent::{sample_bs_coalescent_lineages, CoalescentRecord};
use crate::samplers::pd::sample_poisson_dirichlet;

/// Maps coalescence times to overlaps `x^{-1}(x(1-) e^{-tau})`.
///
/// With cumulative masses `x_l` and `alpha = x(1-)`, the overlap is `q_l`
/// for the smallest `l` with `tau >= ln(alpha / x_l)`.
#[derive(Clone, Debug)]
pub struct OverlapMap {
    thresholds: Vec<f64>,
    locations: Vec<f64>,
}

impl OverlapMap {
    pub fn new(x: &ParametricCdf) -> Self {
        let alpha = x.mass_below_one();
        let mut cumulative = 0.0;
        let mut thresholds = Vec::with_capacity(x.atoms().len());
        let mut locations = Vec::with_capacity(x.atoms().len());
        for (l, &(q, m)) in x.atoms().iter().enumerate() {
            cumulative += m;
            let c = if l + 1 == x.atoms().len() {
                0.0
            } else {
                (alpha / cumulative).ln()
            };
            thresholds.push(c);
            locations.push(q);
        }
        OverlapMap {
            thresholds,
            locations,
        }
    }

    #[inline]
    pub fn overlap(&self, tau: f64) -> f64 {
        let l = self.thresholds.partition_point(|&c| tau < c);
        self.locations[l]
    }
}

/// A Ruelle probability cascade with top-`n` truncation, together with the
/// coalescent that generated its overlaps.
pub fn build_rpc_with_record<R: Rng + ?Sized>(
    x: &ParametricCdf,
    n: usize,
    rng: &mut R,
) -> Result<(Rost, CoalescentRecord)> {
    let alpha = x.mass_below_one();
    if !(alpha > 0.0 && alpha < 1.0) || x.atoms().is_empty() || x.atoms()[0].0 < 0.0 {
        return Err(Error::invalid(format!(
            "cascade needs atoms in [0,1) with 0 < x(1-) < 1, got x(1-) = {alpha}"
        )));
    }
    if n < 2 {
        return Err(Error::invalid(format!("cascade needs N >= 2, got {n}")));
    }
    // coalescent seed first, so the weight stream is the same for every N
    let coalescent_seed = Seed(rng.next_u64());
    let weight_seed = Seed(rng.next_u64());
    let weights = sample_poisson_dirichlet(alpha, n, &mut weight_seed.rng())?;
    let record = sample_bs_coalescent_lineages(n, coalescent_seed)?;
    let map = OverlapMap::new(x);
    let mut entries = vec![1.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let q = map.overlap(record.tau(i, j));
            entries[i * n + j] = q;
            entries[j * n + i] = q;
        }
    }
    let overlaps = OverlapMatrix::from_entries_unchecked(n, entries);
    Ok((Rost::new(weights, overlaps)?, record))
}

/// Ruelle probability cascade for the overlap distribution `x`: weights
/// `PD(x(1-), 0)` in rank order, overlaps from an independent
/// Bolthausen-Sznitman coalescent labeled by rank.
pub fn build_rpc<R: Rng + ?Sized>(x: &ParametricCdf, n: usize, rng: &mut R) -> Result<Rost> {
    build_rpc_with_record(x, n, rng).map(|(rost, _)| rost)
}

/// A generator of independent ROSt replicas addressed by seed.
pub trait RostSource: Sync {
    fn dim(&self) -> usize;

    fn sample(&self, seed: Seed) -> Result<Rost>;
}

/// Cascade replicas of fixed truncation size.
#[derive(Clone, Debug)]
pub struct RpcSource {
    pub x: ParametricCdf,
    pub n: usize,
}

impl RpcSource {
    pub fn new(x: ParametricCdf, n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::invalid(format!("cascade needs N >= 2, got {n}")));
        }
        Ok(RpcSource { x, n })
    }
}

impl RostSource for RpcSource {
    fn dim(&self) -> usize {
        self.n
    }

    fn sample(&self, seed: Seed) -> Result<Rost> {
        build_rpc(&self.x, self.n, &mut seed.rng())
    }
}

/// The same deterministic ROSt for every seed.
#[derive(Clone, Debug)]
pub struct FixedSource(pub Rost);

impl RostSource for FixedSource {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn sample(&self, _seed: Seed) -> Result<Rost> {
        Ok(self.0.clone())
    }
}

impl<S: RostSource + ?Sized> RostSource for &S {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn sample(&self, seed: Seed) -> Result<Rost> {
        (**self).sample(seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn two_level() -> ParametricCdf {
        ParametricCdf::for_cascade(vec![(0.3, 0.25), (0.7, 0.25)]).unwrap()
    }

    #[test]
    fn overlap_map_is_the_shifted_inverse() {
        let x = two_level();
        let map = OverlapMap::new(&x);
        let mut rng = Seed(1).rng();
        for _ in 0..10_000 {
            let tau: f64 = rng.random_range(1e-9..6.0);
            let direct = x.inverse(x.mass_below_one() * (-tau).exp());
            assert_eq!(map.overlap(tau), direct, "tau={tau}");
        }
    }

    #[test]
    fn one_level_is_constant_off_diagonal() {
        let x = ParametricCdf::one_level(0.5, 0.5).unwrap();
        let rost = build_rpc(&x, 40, &mut Seed(2).rng()).unwrap();
        for i in 0..40 {
            for j in 0..40 {
                let expected = if i == j { 1.0 } else { 0.5 };
                assert_eq!(rost.overlap(i, j), expected);
            }
        }
    }

    #[test]
    fn output_is_valid_and_exactly_ultrametric() {
        let x = two_level();
        let rost = build_rpc(&x, 64, &mut Seed(3).rng()).unwrap();
        rost.validate().unwrap();
        let q = rost.label_overlaps();
        assert!(q.max_ultrametric_defect() <= 0.0);
        assert!(q.hierarchy().is_some());
        for v in q.entries() {
            assert!([0.3, 0.7, 1.0].contains(v));
        }
    }

    #[test]
    fn rejects_bad_cdf() {
        let x = ParametricCdf::new(vec![(0.5, 1.0)]).unwrap();
        assert!(build_rpc(&x, 8, &mut Seed(4).rng()).is_err());
        assert!(build_rpc(&two_level(), 1, &mut Seed(4).rng()).is_err());
    }

    #[test]
    fn truncations_are_coupled() {
        let x = two_level();
        let small = build_rpc(&x, 32, &mut Seed(5).rng()).unwrap();
        let large = build_rpc(&x, 64, &mut Seed(5).rng()).unwrap();
        for i in 0..32 {
            for j in 0..32 {
                assert_eq!(small.overlap(i, j), large.overlap(i, j));
            }
        }
    }
}
