//! Ghirlanda-Guerra and Aizenman-Contucci residuals.
//!
//! Every term is estimated from one pool of `s + 2` indices drawn i.i.d.
//! from the weights per draw. Each term averages over all injective
//! assignments of its replica slots to pool positions (a U-statistic), so
//! all terms share the same random numbers and exchangeable terms coincide.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::bootstrap::{EstimateWithError, ReplicaTable};
use crate::estimators::observable::ObservableSpec;
use crate::estimators::sampled::{bootstrap_seed, draw_seed, EstimatorOptions};
use crate::replicas::Replicas;
use crate::rng::Seed;

/// Layout of the per-replica term vector for a given `s`.
///
/// Components: `F = E^(s)[F]`, `Q2 = E^(2)[q^r]`,
/// `A_l = E^(s+1)[q^r_{l,s+1} F]` for `l = 1..s`,
/// `P_{ll'} = E^(s)[q^r_{ll'} F]` for `l < l'`, and
/// `B = E^(s+2)[q^r_{s+1,s+2} F]`.
#[derive(Clone, Copy, Debug)]
pub struct TermLayout {
    pub s: usize,
}

impl TermLayout {
    pub const F: usize = 0;
    pub const Q2: usize = 1;

    pub fn a(&self, l: usize) -> usize {
        2 + l
    }

    pub fn p(&self, l: usize, lp: usize) -> usize {
        debug_assert!(l < lp && lp < self.s);
        // pairs in lexicographic order
        let before: usize = (0..l).map(|a| self.s - 1 - a).sum();
        2 + self.s + before + (lp - l - 1)
    }

    pub fn b(&self) -> usize {
        2 + self.s + self.s * (self.s - 1) / 2
    }

    pub fn len(&self) -> usize {
        self.b() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// `A_s - Q2 F / s - (1/s) sum_{l<s} P_{ls}`.
    pub fn gg(&self, m: &[f64]) -> f64 {
        let s = self.s;
        let sf = s as f64;
        let pairs: f64 = (0..s - 1).map(|l| m[self.p(l, s - 1)]).sum();
        m[self.a(s - 1)] - m[Self::Q2] * m[Self::F] / sf - pairs / sf
    }

    /// GG residual with the new replica compared against slot `l`.
    pub fn gg_slot(&self, m: &[f64], l: usize) -> f64 {
        let s = self.s;
        let sf = s as f64;
        let pairs: f64 = (0..s)
            .filter(|&o| o != l)
            .map(|o| m[self.p(l.min(o), l.max(o))])
            .sum();
        m[self.a(l)] - m[Self::Q2] * m[Self::F] / sf - pairs / sf
    }

    /// GG residual one level up: `B - (Q2 F + sum_l A_l) / (s+1)`.
    pub fn gg_next(&self, m: &[f64]) -> f64 {
        let s1 = (self.s + 1) as f64;
        let a: f64 = (0..self.s).map(|l| m[self.a(l)]).sum();
        m[self.b()] - (m[Self::Q2] * m[Self::F] + a) / s1
    }

    /// `(1/s) sum_{l<l'} P_{ll'} - sum_l A_l + (s+1)/2 B`, the replica-slot
    /// symmetrization of `(s-1)/2 P_12 - s A_s + (s+1)/2 B`.
    pub fn ac(&self, m: &[f64]) -> f64 {
        let s = self.s;
        let sf = s as f64;
        let mut pairs = 0.0;
        for l in 0..s {
            for lp in (l + 1)..s {
                pairs += m[self.p(l, lp)];
            }
        }
        let a: f64 = (0..s).map(|l| m[self.a(l)]).sum();
        pairs / sf - a + (sf + 1.0) / 2.0 * m[self.b()]
    }

    /// `(s+1)/2 R' - (1/2) sum_l R_l` from the GG residuals.
    pub fn ac_from_gg(&self, m: &[f64]) -> f64 {
        let sf = self.s as f64;
        let slots: f64 = (0..self.s).map(|l| self.gg_slot(m, l)).sum();
        (sf + 1.0) / 2.0 * self.gg_next(m) - 0.5 * slots
    }
}

/// Estimated identity terms and residuals on one replica set.
#[derive(Clone, Debug, Serialize)]
pub struct IdentityReport {
    pub s: usize,
    pub r: u32,
    pub terms: Vec<EstimateWithError>,
    pub gg: EstimateWithError,
    pub ac: EstimateWithError,
    /// `ac` recomputed from the GG residuals of the same terms.
    pub ac_from_gg: f64,
}

/// All uses of the identity estimators validate `s` the same way.
fn check_s(s: usize, obs: &ObservableSpec) -> Result<()> {
    if s < 2 {
        return Err(Error::invalid(format!("s must be >= 2, got {s}")));
    }
    if obs.s != s {
        return Err(Error::invalid(format!(
            "observable is defined on {} replicas but s = {s}",
            obs.s
        )));
    }
    obs.validate()
}

/// Injective assignments of `len` slots to `0..m`.
fn injective_tuples(m: usize, len: usize) -> Vec<Vec<usize>> {
    fn rec(m: usize, len: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for p in 0..m {
            if !used[p] {
                used[p] = true;
                cur.push(p);
                rec(m, len, cur, used, out);
                cur.pop();
                used[p] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(m, len, &mut Vec::with_capacity(len), &mut vec![false; m], &mut out);
    out
}

/// Per-replica term vectors averaged over `k` pooled draws.
pub fn identity_terms(
    replicas: Replicas<'_>,
    s: usize,
    r: u32,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
    opts: &EstimatorOptions,
) -> Result<ReplicaTable> {
    check_s(s, obs)?;
    if r == 0 {
        return Err(Error::invalid("r must be a positive integer"));
    }
    if k == 0 {
        return Err(Error::invalid("draws per replica must be positive"));
    }
    let m = s + 2;
    opts.check_budget(k, m)?;
    let layout = TermLayout { s };
    let tuples = injective_tuples(m, s);
    let pairs = injective_tuples(m, 2);
    let rows = replicas.map(|i, rost| {
        let mut rng = draw_seed(seed, i).rng();
        let sampler = rost.weights().index_sampler();
        let mut pool = vec![0usize; m];
        let mut raw = vec![0.0; m * m];
        let mut pow = vec![0.0; m * m];
        let mut acc = vec![0.0; layout.len()];
        let mut term = vec![0.0; layout.len()];
        for _ in 0..k {
            for p in pool.iter_mut() {
                *p = sampler.sample(&mut rng);
            }
            for a in 0..m {
                for b in 0..m {
                    let q = rost.overlap(pool[a], pool[b]);
                    raw[a * m + b] = q;
                    pow[a * m + b] = q.powi(r as i32);
                }
            }
            term.iter_mut().for_each(|t| *t = 0.0);
            for pr in &pairs {
                term[TermLayout::Q2] += pow[pr[0] * m + pr[1]];
            }
            term[TermLayout::Q2] /= pairs.len() as f64;
            let mut rest = [0usize; 2];
            for t in &tuples {
                let f = obs.eval(|a, b| raw[t[a] * m + t[b]]);
                term[TermLayout::F] += f;
                for l in 0..s {
                    for lp in (l + 1)..s {
                        term[layout.p(l, lp)] += pow[t[l] * m + t[lp]] * f;
                    }
                }
                let mut n_rest = 0;
                for p in 0..m {
                    if !t.contains(&p) {
                        rest[n_rest] = p;
                        n_rest += 1;
                    }
                }
                for l in 0..s {
                    let a = pow[t[l] * m + rest[0]] + pow[t[l] * m + rest[1]];
                    term[layout.a(l)] += 0.5 * a * f;
                }
                term[layout.b()] += pow[rest[0] * m + rest[1]] * f;
            }
            let nt = tuples.len() as f64;
            for (j, v) in term.iter().enumerate() {
                acc[j] += if j == TermLayout::Q2 { *v } else { v / nt };
            }
        }
        Ok(acc.iter().map(|a| a / k as f64).collect())
    })?;
    ReplicaTable::new(layout.len(), rows, k)
}

/// Both residuals and all terms, sharing draws and bootstrap resamples.
pub fn identity_report(
    replicas: Replicas<'_>,
    s: usize,
    r: u32,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
) -> Result<IdentityReport> {
    let opts = EstimatorOptions::default();
    let table = identity_terms(replicas, s, r, obs, k, seed, &opts)?;
    let layout = TermLayout { s };
    let gg = |m: &[f64]| layout.gg(m);
    let ac = |m: &[f64]| layout.ac(m);
    let res = table.estimate_all(&[&gg, &ac], opts.bootstrap_resamples, bootstrap_seed(seed))?;
    let terms = table.component_estimates(opts.bootstrap_resamples, bootstrap_seed(seed))?;
    Ok(IdentityReport {
        s,
        r,
        terms,
        gg: res[0],
        ac: res[1],
        ac_from_gg: layout.ac_from_gg(&table.means()),
    })
}

/// `E^(s+1)[q^r_{s,s+1} F] - (1/s) E^(2)[q^r] E^(s)[F] - (1/s) sum_{l<s} E^(s)[q^r_{ls} F]`.
pub fn gg_residual(
    replicas: Replicas<'_>,
    s: usize,
    r: u32,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
) -> Result<EstimateWithError> {
    Ok(identity_report(replicas, s, r, obs, k, seed)?.gg)
}

/// Aizenman-Contucci residual, symmetrized over replica slots.
pub fn ac_residual(
    replicas: Replicas<'_>,
    s: usize,
    r: u32,
    obs: &ObservableSpec,
    k: usize,
    seed: Seed,
) -> Result<EstimateWithError> {
    Ok(identity_report(replicas, s, r, obs, k, seed)?.ac)
}
