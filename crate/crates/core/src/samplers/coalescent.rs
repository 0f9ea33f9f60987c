use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{Error, Result};
use crate::rng::Seed;

/// One realization of the Bolthausen-Sznitman coalescent on `n` leaves.
#[derive(Clone, Debug, PartialEq)]
pub struct CoalescentRecord {
    n: usize,
    times: Vec<f64>,
}

/// A merger: at `time`, the listed blocks (each a sorted list of leaves)
/// merge into one.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeEvent {
    pub time: f64,
    pub blocks: Vec<Vec<usize>>,
}

impl CoalescentRecord {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Coalescence time of leaves `i` and `j`; zero on the diagonal.
    #[inline]
    pub fn tau(&self, i: usize, j: usize) -> f64 {
        self.times[i * self.n + j]
    }

    /// Row-major `n x n` matrix of pairwise coalescence times.
    pub fn pairwise_times(&self) -> &[f64] {
        &self.times
    }

    /// Mergers in increasing time, reconstructed from the pairwise times.
    pub fn merge_events(&self) -> Vec<MergeEvent> {
        let n = self.n;
        let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                pairs.push((self.tau(i, j), i, j));
            }
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut block_of: Vec<usize> = (0..n).collect();
        let mut blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
        let mut events = Vec::new();
        let mut start = 0;
        while start < pairs.len() {
            let t = pairs[start].0;
            let end = start + pairs[start..].partition_point(|p| p.0 == t);
            let mut involved: Vec<usize> = Vec::new();
            for &(_, i, j) in &pairs[start..end] {
                involved.push(block_of[i]);
                involved.push(block_of[j]);
            }
            involved.sort_unstable();
            involved.dedup();
            let merged_blocks: Vec<Vec<usize>> =
                involved.iter().map(|&b| blocks[b].clone()).collect();
            let target = involved[0];
            for &b in &involved[1..] {
                let moved = std::mem::take(&mut blocks[b]);
                for &leaf in &moved {
                    block_of[leaf] = target;
                }
                blocks[target].extend(moved);
            }
            blocks[target].sort_unstable();
            events.push(MergeEvent {
                time: t,
                blocks: merged_blocks,
            });
            start = end;
        }
        events
    }

    /// Max of `tau_ik - max(tau_ij, tau_jk)` over all triples; at most 0 for
    /// an ultrametric.
    pub fn max_ultrametric_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    worst = worst.max(self.tau(i, k) - self.tau(i, j).max(self.tau(j, k)));
                }
            }
        }
        worst
    }
}

/// Merger rate of one specific `k`-subset among `b` blocks,
/// `(k-2)! (b-k)! / (b-1)!`.
pub fn merge_rate(b: usize, k: usize) -> f64 {
    assert!(2 <= k && k <= b);
    // 1 / ((b-1) * C(b-2, k-2))
    let mut c = 1.0;
    for i in 0..(k - 2) {
        c = c * (b - 2 - i) as f64 / (i + 1) as f64;
    }
    1.0 / ((b - 1) as f64 * c)
}

/// Total merger rate with `b` blocks, `sum_k C(b,k) lambda_{b,k} = b - 1`.
pub fn total_rate(b: usize) -> f64 {
    (b - 1) as f64
}

/// Size of the next merger with `b` blocks present.
///
/// `P(k) = b / ((b-1) k (k-1))`, drawn by inverting its closed-form
/// distribution function `b (1 - 1/k) / (b - 1)`.
fn merger_size<R: Rng + ?Sized>(b: usize, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let bf = b as f64;
    let k = (bf / (bf - u * (bf - 1.0))).ceil();
    (k as usize).clamp(2, b)
}

/// Markov jump chain on block partitions started from `n` singletons and run
/// until one block remains.
pub fn sample_bs_coalescent<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<CoalescentRecord> {
    if n < 2 {
        return Err(Error::invalid(format!("coalescent needs n >= 2, got {n}")));
    }
    let mut times = vec![0.0; n * n];
    let mut blocks: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    let mut t = 0.0;
    while blocks.len() > 1 {
        let b = blocks.len();
        let hold: f64 = Exp1.sample(rng);
        t += hold / total_rate(b);
        let k = merger_size(b, rng);
        let mut chosen = index::sample(rng, b, k).into_vec();
        chosen.sort_unstable();
        for (a, &ba) in chosen.iter().enumerate() {
            for &bb in &chosen[a + 1..] {
                for &i in &blocks[ba] {
                    for &j in &blocks[bb] {
                        times[i * n + j] = t;
                        times[j * n + i] = t;
                    }
                }
            }
        }
        let target = chosen[0];
        for &c in chosen[1..].iter().rev() {
            let moved = blocks.swap_remove(c);
            blocks[target].extend(moved);
        }
    }
    Ok(CoalescentRecord { n, times })
}

/// A visible merger of the coalescent restricted to the lineages added so
/// far: `k` of the `b` blocks present merge at `time`; `rep` is a leaf of
/// the merged block.
#[derive(Clone, Copy, Debug)]
struct Event {
    time: f64,
    k: usize,
    b: usize,
    rep: usize,
}

/// Builds the coalescent on `n` leaves by adding lineages one at a time.
///
/// Lineage `j` draws from its own stream `seed.child(j)`, so the restriction
/// of the result to the first `m` leaves does not depend on `n`. Given the
/// restricted history on `j` leaves, the new lineage joins each existing
/// merger of `k` out of `b` blocks with probability `(k - 1) / b` (the
/// posterior mean of the uniform paintbox), and otherwise pairs with a
/// uniformly chosen block at an independent Exponential(1) time.
pub fn sample_bs_coalescent_lineages(n: usize, seed: Seed) -> Result<CoalescentRecord> {
    if n < 2 {
        return Err(Error::invalid(format!("coalescent needs n >= 2, got {n}")));
    }
    let mut times = vec![0.0; n * n];
    let mut events: Vec<Event> = Vec::with_capacity(n);
    // time at which leaf j first coalesces with a smaller leaf
    let mut join = vec![f64::INFINITY; n];
    let mut candidates: Vec<usize> = Vec::with_capacity(n);
    for j in 1..n {
        let mut rng = seed.child(j as u64).rng();
        let pairing: f64 = Exp1.sample(&mut rng);
        let mut absorbed: Option<(usize, f64, usize)> = None; // (event slot, time, rep)
        for (e, ev) in events.iter().enumerate() {
            if ev.time >= pairing {
                break;
            }
            if rng.random::<f64>() * (ev.b as f64) < (ev.k - 1) as f64 {
                absorbed = Some((e, ev.time, ev.rep));
                break;
            }
        }
        let (t_abs, rep) = match absorbed {
            Some((e, t, rep)) => {
                for ev in &mut events[..e] {
                    ev.b += 1;
                }
                events[e].k += 1;
                events[e].b += 1;
                (t, rep)
            }
            None => {
                candidates.clear();
                candidates.extend((0..j).filter(|&i| join[i] > pairing));
                let rep = candidates[rng.random_range(0..candidates.len())];
                let pos = events.partition_point(|ev| ev.time < pairing);
                for ev in &mut events[..pos] {
                    ev.b += 1;
                }
                events.insert(
                    pos,
                    Event {
                        time: pairing,
                        k: 2,
                        b: candidates.len() + 1,
                        rep,
                    },
                );
                (pairing, rep)
            }
        };
        join[j] = t_abs;
        for i in 0..j {
            let t = if i == rep {
                t_abs
            } else {
                t_abs.max(times[rep * n + i])
            };
            times[j * n + i] = t;
            times[i * n + j] = t;
        }
    }
    Ok(CoalescentRecord { n, times })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::ks_one_sample;

    fn integral_rate(b: usize, k: usize) -> f64 {
        crate::stats::simpson(
            |x| x.powi(k as i32 - 2) * (1.0 - x).powi((b - k) as i32),
            0.0,
            1.0,
            2000,
        )
    }

    #[test]
    fn rates_match_beta_integrals() {
        for b in 2..9 {
            let mut total = 0.0;
            let mut binom = 1.0;
            for k in 1..=b {
                binom = binom * (b - k + 1) as f64 / k as f64;
                if k >= 2 {
                    assert!((merge_rate(b, k) - integral_rate(b, k)).abs() < 1e-10);
                    total += binom * merge_rate(b, k);
                }
            }
            assert!((total - total_rate(b)).abs() < 1e-12);
        }
        assert_eq!(merge_rate(2, 2), 1.0);
        assert!((3.0 * merge_rate(3, 2) + merge_rate(3, 3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn merger_size_law() {
        let mut rng = Seed(4).rng();
        let b = 6;
        let reps = 100_000;
        let mut counts = vec![0usize; b + 1];
        for _ in 0..reps {
            counts[merger_size(b, &mut rng)] += 1;
        }
        for k in 2..=b {
            let p = b as f64 / ((b - 1) * k * (k - 1)) as f64;
            let f = counts[k] as f64 / reps as f64;
            assert!((f - p).abs() < 4.0 * (p * (1.0 - p) / reps as f64).sqrt(), "k={k}");
        }
    }

    #[test]
    fn two_leaves_single_exponential_merge() {
        let mut rng = Seed(5).rng();
        let taus: Vec<f64> = (0..5000)
            .map(|_| {
                let rec = sample_bs_coalescent(2, &mut rng).unwrap();
                assert_eq!(rec.merge_events().len(), 1);
                rec.tau(0, 1)
            })
            .collect();
        let ks = ks_one_sample(&taus, |t| 1.0 - (-t).exp()).unwrap();
        assert!(ks.p_value > 0.01, "{ks:?}");
    }

    #[test]
    fn records_are_ultrametric() {
        let mut rng = Seed(6).rng();
        for n in [2, 5, 17] {
            let a = sample_bs_coalescent(n, &mut rng).unwrap();
            assert!(a.max_ultrametric_defect() <= 0.0);
            let b = sample_bs_coalescent_lineages(n, Seed(n as u64)).unwrap();
            assert!(b.max_ultrametric_defect() <= 0.0);
            for rec in [&a, &b] {
                for i in 0..n {
                    assert_eq!(rec.tau(i, i), 0.0);
                }
                let ev = rec.merge_events();
                let merged: usize = ev.iter().map(|e| e.blocks.len() - 1).sum();
                assert_eq!(merged, n - 1);
                assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
            }
        }
    }

    #[test]
    fn lineage_construction_is_prefix_consistent() {
        let small = sample_bs_coalescent_lineages(20, Seed(77)).unwrap();
        let large = sample_bs_coalescent_lineages(45, Seed(77)).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(small.tau(i, j), large.tau(i, j));
            }
        }
    }

    #[test]
    fn three_leaves_patterns_are_exchangeable() {
        // triple merger w.p. lambda_{3,3}/2 = 1/4, each pair first w.p. 1/4
        let reps = 40_000;
        let mut jump = [0usize; 4];
        let mut lineage = [0usize; 4];
        let pattern = |rec: &CoalescentRecord| {
            let (a, b, c) = (rec.tau(0, 1), rec.tau(0, 2), rec.tau(1, 2));
            if a == b && b == c {
                0
            } else if a < b {
                1
            } else if b < a {
                2
            } else {
                3
            }
        };
        let mut rng = Seed(8).rng();
        for r in 0..reps {
            jump[pattern(&sample_bs_coalescent(3, &mut rng).unwrap())] += 1;
            lineage[pattern(&sample_bs_coalescent_lineages(3, Seed(1000 + r as u64)).unwrap())] += 1;
        }
        let sd = (0.25 * 0.75 / reps as f64).sqrt();
        for counts in [jump, lineage] {
            for c in counts {
                assert!((c as f64 / reps as f64 - 0.25).abs() < 4.0 * sd, "{counts:?}");
            }
        }
    }
}
