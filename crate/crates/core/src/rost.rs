use std::sync::Arc;

use crate::error::{Error, Result};
use crate::overlap::OverlapMatrix;
use crate::weights::RankedWeights;

/// Default tolerance for identifying particles with overlap 1.
pub const MERGE_TOL: f64 = 1e-9;

/// A random overlap structure: ranked weights, overlaps and particle labels.
///
/// Overlaps are stored once, indexed by particle label; `labels[rank]` names
/// the particle currently at `rank`. Evolution only permutes labels, so the
/// overlap seen between ranks `i` and `j` is the conjugated matrix
/// `q[labels[i]][labels[j]]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Rost {
    weights: RankedWeights,
    overlaps: Arc<OverlapMatrix>,
    labels: Vec<u32>,
}

impl Rost {
    /// Labels are `0..N` in rank order.
    pub fn new(weights: RankedWeights, overlaps: OverlapMatrix) -> Result<Self> {
        let labels = (0..weights.len() as u32).collect();
        Self::with_labels(weights, Arc::new(overlaps), labels)
    }

    pub fn with_labels(
        weights: RankedWeights,
        overlaps: Arc<OverlapMatrix>,
        labels: Vec<u32>,
    ) -> Result<Self> {
        let n = weights.len();
        if overlaps.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: overlaps.dim(),
            });
        }
        if labels.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: labels.len(),
            });
        }
        let mut seen = vec![false; n];
        for &l in &labels {
            let l = l as usize;
            if l >= n || std::mem::replace(&mut seen[l], true) {
                return Err(Error::DataIntegrity(format!(
                    "labels are not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Rost {
            weights,
            overlaps,
            labels,
        })
    }

    pub(crate) fn from_parts_unchecked(
        weights: RankedWeights,
        overlaps: Arc<OverlapMatrix>,
        labels: Vec<u32>,
    ) -> Self {
        debug_assert_eq!(weights.len(), labels.len());
        Rost {
            weights,
            overlaps,
            labels,
        }
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &RankedWeights {
        &self.weights
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    /// Overlap matrix indexed by particle label.
    pub fn label_overlaps(&self) -> &Arc<OverlapMatrix> {
        &self.overlaps
    }

    /// Overlap between the particles at ranks `i` and `j`.
    #[inline]
    pub fn overlap(&self, i: usize, j: usize) -> f64 {
        self.overlaps
            .get(self.labels[i] as usize, self.labels[j] as usize)
    }

    /// The rank-indexed overlap matrix.
    pub fn rank_overlaps(&self) -> OverlapMatrix {
        let order: Vec<usize> = self.labels.iter().map(|&l| l as usize).collect();
        self.overlaps.permuted(&order)
    }

    /// Full invariant check, including positive semidefiniteness.
    pub fn validate(&self) -> Result<()> {
        RankedWeights::new(self.weights.as_slice().to_vec())?;
        self.overlaps.validate()
    }

    /// Collapses groups of particles whose pairwise overlaps are all within
    /// `tol` of 1 into one particle carrying the summed weight.
    ///
    /// The merged particle keeps the overlaps of its best-ranked member. The
    /// result is relabeled `0..N'` in rank order. Returns the input unchanged
    /// when nothing merges.
    pub fn merge_identical(&self, tol: f64) -> Result<Rost> {
        if !(tol >= 0.0 && tol < 1.0) {
            return Err(Error::invalid(format!("merge tolerance {tol} outside [0,1)")));
        }
        let n = self.dim();
        let near_one = |i: usize, j: usize| self.overlap(i, j) >= 1.0 - tol;

        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let mut merged_any = false;
        for i in 0..n {
            for j in (i + 1)..n {
                if near_one(i, j) {
                    merged_any = true;
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        // the smaller rank stays the root
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        if !merged_any {
            return Ok(self.clone());
        }

        let mut members: Vec<Vec<usize>> = vec![Vec::new(); n];
        for i in 0..n {
            let root = find(&mut parent, i);
            members[root].push(i);
        }
        let groups: Vec<Vec<usize>> = members.into_iter().filter(|g| !g.is_empty()).collect();
        for g in &groups {
            for (a, &i) in g.iter().enumerate() {
                for &j in &g[a + 1..] {
                    if !near_one(i, j) {
                        return Err(Error::MalformedOverlap(format!(
                            "ranks {i} and {j} are linked through overlaps near 1 \
                             but have overlap {}",
                            self.overlap(i, j)
                        )));
                    }
                }
            }
        }

        let w = self.weights.as_slice();
        let masses: Vec<f64> = groups.iter().map(|g| g.iter().map(|&i| w[i]).sum()).collect();
        let (weights, order) = RankedWeights::from_masses(&masses)?;
        let reps: Vec<usize> = order.iter().map(|&g| groups[g][0]).collect();
        let m = reps.len();
        let mut entries = vec![1.0; m * m];
        for a in 0..m {
            for b in 0..m {
                if a != b {
                    entries[a * m + b] = self.overlap(reps[a], reps[b]);
                }
            }
        }
        Rost::new(weights, OverlapMatrix::new(m, entries)?)
    }
}
