use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Relative tolerance on the smallest eigenvalue: `lambda_min >= -PSD_TOL * N`.
pub const PSD_TOL: f64 = 1e-8;

/// Max number of distinct off-diagonal values for hierarchy detection.
pub const MAX_HIERARCHY_LEVELS: usize = 64;

/// Symmetric overlap matrix with unit diagonal, stored row-major.
///
/// Construction checks the cheap structural invariants (square, symmetric,
/// unit diagonal, entries in `[-1, 1]`). The strict invariants (`|q| < 1` off
/// the diagonal, positive semidefiniteness) cost more and are checked by
/// [`OverlapMatrix::validate`].
#[derive(Debug)]
pub struct OverlapMatrix {
    n: usize,
    entries: Vec<f64>,
    hierarchy: OnceLock<Option<Hierarchy>>,
}

impl Clone for OverlapMatrix {
    fn clone(&self) -> Self {
        OverlapMatrix {
            n: self.n,
            entries: self.entries.clone(),
            hierarchy: OnceLock::new(),
        }
    }
}

impl PartialEq for OverlapMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.entries == other.entries
    }
}

impl OverlapMatrix {
    pub fn new(n: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: entries.len(),
            });
        }
        for i in 0..n {
            if entries[i * n + i] != 1.0 {
                return Err(Error::MalformedOverlap(format!(
                    "diagonal entry {i} is {}, must be exactly 1",
                    entries[i * n + i]
                )));
            }
            for j in (i + 1)..n {
                let a = entries[i * n + j];
                if !a.is_finite() || a.abs() > 1.0 {
                    return Err(Error::MalformedOverlap(format!(
                        "entry ({i},{j}) = {a} outside [-1,1]"
                    )));
                }
                if a != entries[j * n + i] {
                    return Err(Error::MalformedOverlap(format!(
                        "not symmetric at ({i},{j}): {a} vs {}",
                        entries[j * n + i]
                    )));
                }
            }
        }
        Ok(Self::from_entries_unchecked(n, entries))
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Result<Self> {
        let mut entries = vec![1.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = f(i, j);
                entries[i * n + j] = v;
                entries[j * n + i] = v;
            }
        }
        Self::new(n, entries)
    }

    pub fn identity(n: usize) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
        }
        Self::from_entries_unchecked(n, entries)
    }

    /// Constant off-diagonal overlap `q`.
    pub fn constant(n: usize, q: f64) -> Result<Self> {
        Self::from_fn(n, |_, _| q)
    }

    pub(crate) fn from_entries_unchecked(n: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n * n);
        OverlapMatrix {
            n,
            entries,
            hierarchy: OnceLock::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// Entrywise power `Q^{*r}`.
    pub fn entrywise_power(&self, r: u32) -> OverlapMatrix {
        let entries = self.entries.iter().map(|q| q.powi(r as i32)).collect();
        Self::from_entries_unchecked(self.n, entries)
    }

    /// Conjugation by a permutation: `result[a][b] = self[order[a]][order[b]]`.
    pub fn permuted(&self, order: &[usize]) -> OverlapMatrix {
        let n = self.n;
        let mut entries = vec![0.0; n * n];
        for (a, &ia) in order.iter().enumerate() {
            for (b, &ib) in order.iter().enumerate() {
                entries[a * n + b] = self.entries[ia * n + ib];
            }
        }
        Self::from_entries_unchecked(n, entries)
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.entries)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        if self.n == 0 {
            return 0.0;
        }
        self.to_dmatrix()
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Eigenvalues sorted increasing.
    pub fn sorted_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.to_dmatrix().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn check_psd(&self) -> Result<()> {
        let lmin = self.min_eigenvalue();
        if lmin < -PSD_TOL * self.n as f64 {
            return Err(Error::DataIntegrity(format!(
                "smallest eigenvalue {lmin:e} below -{PSD_TOL:e}*N"
            )));
        }
        Ok(())
    }

    /// Full invariant check: off-diagonal entries strictly inside `(-1, 1)`
    /// and positive semidefinite.
    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        for i in 0..n {
            for j in (i + 1)..n {
                let q = self.get(i, j);
                if q.abs() >= 1.0 {
                    return Err(Error::MalformedOverlap(format!(
                        "off-diagonal entry ({i},{j}) = {q}; identical particles must be merged"
                    )));
                }
            }
        }
        self.check_psd().map_err(|e| match e {
            Error::DataIntegrity(m) => Error::MalformedOverlap(m),
            other => other,
        })
    }

    /// Tree structure of the matrix when it is ultrametric with finitely many
    /// nonnegative off-diagonal values, computed once and cached.
    pub fn hierarchy(&self) -> Option<&Hierarchy> {
        self.hierarchy.get_or_init(|| Hierarchy::detect(self)).as_ref()
    }

    pub fn is_ultrametric(&self) -> bool {
        if self.hierarchy().is_some() {
            return true;
        }
        self.max_ultrametric_defect() <= 0.0
    }

    /// `max over triples of min(q_ij, q_jk) - q_ik`, by exhaustive scan.
    pub fn max_ultrametric_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    let d = self.get(i, j).min(self.get(j, k)) - self.get(i, k);
                    worst = worst.max(d);
                }
            }
        }
        worst
    }
}

/// Nested partitions of an ultrametric overlap matrix.
///
/// `levels` holds the distinct off-diagonal values in increasing order.
/// Particles `i != j` are in the same cluster at level `l` iff
/// `q_ij >= levels[l]`; the overlap of `i != j` is the value of the deepest
/// level at which they share a cluster.
#[derive(Clone, Debug, PartialEq)]
pub struct Hierarchy {
    levels: Vec<f64>,
    clusters: Vec<Vec<u32>>,
    cluster_counts: Vec<usize>,
}

impl Hierarchy {
    fn detect(q: &OverlapMatrix) -> Option<Hierarchy> {
        let n = q.dim();
        let mut levels: Vec<f64> = Vec::new();
        for i in 0..n {
            for &v in &q.row(i)[i + 1..] {
                if let Err(pos) = levels.binary_search_by(|x| x.total_cmp(&v)) {
                    if levels.len() == MAX_HIERARCHY_LEVELS {
                        return None;
                    }
                    levels.insert(pos, v);
                }
            }
        }
        if levels.first().is_some_and(|&v| v < 0.0) {
            return None;
        }
        let mut clusters = Vec::with_capacity(levels.len());
        let mut cluster_counts = Vec::with_capacity(levels.len());
        for &v in &levels {
            // representative: smallest label whose overlap reaches the level
            let mut ids = vec![0u32; n];
            let mut count = 0u32;
            for i in 0..n {
                let row = q.row(i);
                match (0..i).find(|&j| row[j] >= v) {
                    Some(rep) => ids[i] = ids[rep],
                    None => {
                        ids[i] = count;
                        count += 1;
                    }
                }
            }
            clusters.push(ids);
            cluster_counts.push(count as usize);
        }
        // {q >= v} must coincide with the cluster relation at every level.
        for i in 0..n {
            let row = q.row(i);
            for j in (i + 1)..n {
                for (l, &v) in levels.iter().enumerate() {
                    let same = clusters[l][i] == clusters[l][j];
                    if same != (row[j] >= v) {
                        return None;
                    }
                }
            }
        }
        Some(Hierarchy {
            levels,
            clusters,
            cluster_counts,
        })
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    /// Cluster id of each particle at level `l`.
    pub fn clusters(&self, l: usize) -> &[u32] {
        &self.clusters[l]
    }

    pub fn cluster_count(&self, l: usize) -> usize {
        self.cluster_counts[l]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn power_of_identity_and_constant() {
        let id = OverlapMatrix::identity(4).entrywise_power(3);
        assert_eq!(id, OverlapMatrix::identity(4));

        let q = OverlapMatrix::constant(3, 0.5).unwrap().entrywise_power(2);
        for i in 0..3 {
            for j in 0..3 {
                let expected = if i == j { 1.0 } else { 0.25 };
                assert_eq!(q.get(i, j), expected);
            }
        }
    }

    #[test]
    fn rejects_bad_structure() {
        assert!(OverlapMatrix::new(2, vec![1.0, 0.3, 0.2, 1.0]).is_err());
        assert!(OverlapMatrix::new(2, vec![0.9, 0.3, 0.3, 1.0]).is_err());
        assert!(OverlapMatrix::new(2, vec![1.0, 1.3, 1.3, 1.0]).is_err());
        assert!(OverlapMatrix::new(2, vec![1.0, 0.3, 0.3]).is_err());
    }

    #[test]
    fn validate_catches_non_psd_and_unit_overlap() {
        let bad = OverlapMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 1) | (1, 2) => 0.8,
            _ => 0.1,
        })
        .unwrap();
        assert!(bad.validate().is_err());
        let ok = OverlapMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 1) | (1, 2) => 0.7,
            _ => 0.1,
        })
        .unwrap();
        assert!(ok.validate().is_ok());
        let dup = OverlapMatrix::constant(2, 1.0).unwrap();
        assert!(dup.validate().is_err());
    }

    #[test]
    fn hierarchy_of_two_level_blocks() {
        // blocks {0,1}, {2}, {3,4}: 0.7 inside, 0.3 across
        let block = [0, 0, 1, 2, 2];
        let q = OverlapMatrix::from_fn(5, |i, j| if block[i] == block[j] { 0.7 } else { 0.3 })
            .unwrap();
        let h = q.hierarchy().expect("ultrametric");
        assert_eq!(h.levels(), &[0.3, 0.7]);
        assert_eq!(h.cluster_count(0), 1);
        assert_eq!(h.cluster_count(1), 3);
        assert_eq!(h.clusters(1), &[0, 0, 1, 2, 2]);
        assert!(q.is_ultrametric());
    }

    #[test]
    fn hierarchy_rejects_violation() {
        let q = OverlapMatrix::from_fn(3, |i, j| match (i, j) {
            (0, 1) | (1, 2) => 0.7,
            _ => 0.1,
        })
        .unwrap();
        assert!(q.hierarchy().is_none());
        assert!(q.max_ultrametric_defect() > 0.5);
        assert!(!q.is_ultrametric());
    }

    #[test]
    fn permuted_preserves_spectrum() {
        let q = OverlapMatrix::from_fn(4, |i, j| 0.1 * (i + j) as f64).unwrap();
        let p = q.permuted(&[2, 0, 3, 1]);
        let a = q.sorted_eigenvalues();
        let b = p.sorted_eigenvalues();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(p.get(0, 1), q.get(2, 0));
    }
}
