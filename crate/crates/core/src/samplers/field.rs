use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;

/// Jitter schedule: first attempt unjittered, then `1e-12 * trace / N`
/// multiplied by 10 up to this many times.
pub const MAX_JITTER_ESCALATIONS: u32 = 6;
const BASE_JITTER: f64 = 1e-12;

/// One draw of the centered gaussian field with covariance `Q^{*r}`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianField {
    pub values: Vec<f64>,
    pub r: u32,
}

#[derive(Clone, Debug)]
enum Route {
    /// `kappa_i = sum_l a_l Z_{cluster_l(i)} + a_leaf Z_i` for an ultrametric
    /// `Q` with finitely many nonnegative levels.
    Hierarchical {
        coefficients: Vec<f64>,
        leaf: f64,
        clusters: Vec<Vec<u32>>,
        counts: Vec<usize>,
    },
    Cholesky {
        factor: DMatrix<f64>,
        jitter: f64,
    },
}

/// Reusable sampler for the field with covariance `Q^{*r}`.
///
/// Draws are consumed from the stream in label order, so for a hierarchical
/// `Q` the field on the first `m` labels does not depend on `N`.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    n: usize,
    r: u32,
    route: Route,
}

impl FieldSampler {
    /// Picks the tree decomposition when `Q` is hierarchical, otherwise a
    /// jittered Cholesky factorization.
    pub fn new(q: &OverlapMatrix, r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("r must be a positive integer"));
        }
        match Self::hierarchical(q, r) {
            Some(s) => Ok(s),
            None => Self::cholesky(q, r),
        }
    }

    fn hierarchical(q: &OverlapMatrix, r: u32) -> Option<Self> {
        let h = q.hierarchy()?;
        let mut coefficients = Vec::with_capacity(h.levels().len());
        let mut prev = 0.0;
        for &v in h.levels() {
            let p = v.powi(r as i32);
            coefficients.push((p - prev).max(0.0).sqrt());
            prev = p;
        }
        let clusters = (0..h.levels().len()).map(|l| h.clusters(l).to_vec()).collect();
        let counts = (0..h.levels().len()).map(|l| h.cluster_count(l)).collect();
        Some(FieldSampler {
            n: q.dim(),
            r,
            route: Route::Hierarchical {
                coefficients,
                leaf: (1.0 - prev).max(0.0).sqrt(),
                clusters,
                counts,
            },
        })
    }

    /// Lower Cholesky factor of `Q^{*r} + jitter I` with the jitter schedule.
    pub fn cholesky(q: &OverlapMatrix, r: u32) -> Result<Self> {
        if r == 0 {
            return Err(Error::invalid("r must be a positive integer"));
        }
        let n = q.dim();
        let cov = q.entrywise_power(r).to_dmatrix();
        let trace = cov.trace();
        let base = BASE_JITTER * trace / n.max(1) as f64;
        let mut jitter = 0.0;
        for attempt in 0..=MAX_JITTER_ESCALATIONS + 1 {
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(chol) = Cholesky::new(m) {
                return Ok(FieldSampler {
                    n,
                    r,
                    route: Route::Cholesky {
                        factor: chol.unpack(),
                        jitter,
                    },
                });
            }
            jitter = base * 10f64.powi(attempt as i32);
        }
        let lmin = q.entrywise_power(r).min_eigenvalue();
        Err(Error::NumericalFailure(format!(
            "Cholesky factorization of Q^{{*{r}}} (N={n}) failed with jitter up to {:e}; \
             smallest eigenvalue {lmin:e}, trace {trace}",
            base * 10f64.powi(MAX_JITTER_ESCALATIONS as i32)
        )))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> u32 {
        self.r
    }

    pub fn is_hierarchical(&self) -> bool {
        matches!(self.route, Route::Hierarchical { .. })
    }

    /// Diagonal jitter used by the Cholesky route.
    pub fn jitter(&self) -> Option<f64> {
        match self.route {
            Route::Cholesky { jitter, .. } => Some(jitter),
            Route::Hierarchical { .. } => None,
        }
    }

    /// Writes one draw into `out`, indexed by label.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        assert_eq!(out.len(), self.n);
        match &self.route {
            Route::Hierarchical {
                coefficients,
                leaf,
                clusters,
                counts,
            } => {
                let levels = coefficients.len();
                let mut cluster_normals: Vec<Vec<f64>> =
                    counts.iter().map(|&c| Vec::with_capacity(c)).collect();
                for (i, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for l in 0..levels {
                        let c = clusters[l][i] as usize;
                        let normals = &mut cluster_normals[l];
                        // cluster ids appear in order of first member
                        if c == normals.len() {
                            normals.push(rng.sample(StandardNormal));
                        }
                        acc += coefficients[l] * normals[c];
                    }
                    let z: f64 = rng.sample(StandardNormal);
                    *o = acc + leaf * z;
                }
            }
            Route::Cholesky { factor, .. } => {
                let z = DVector::from_fn(self.n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let x = factor * z;
                out.copy_from_slice(x.as_slice());
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GaussianField {
        let mut values = vec![0.0; self.n];
        self.sample_into(rng, &mut values);
        GaussianField { values, r: self.r }
    }
}

/// One draw of the field by Cholesky factorization of `Q^{*r}` with
/// adaptive diagonal jitter.
pub fn sample_gaussian_field<R: Rng + ?Sized>(
    q: &OverlapMatrix,
    r: u32,
    rng: &mut R,
) -> Result<GaussianField> {
    Ok(FieldSampler::cholesky(q, r)?.sample(rng))
}
