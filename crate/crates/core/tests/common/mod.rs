//! Exact laws used as independent oracles by the integration tests.
#![allow(dead_code)]

use rost_core::ParametricCdf;

/// All set partitions of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for b in 0..=next {
            prefix.push(b);
            grow(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        out.push(Vec::new());
    } else {
        grow(&mut Vec::with_capacity(n), n, &mut out);
    }
    out
}

fn rising(a: f64, k: usize) -> f64 {
    (0..k).map(|i| a + i as f64).product()
}

/// Exchangeable partition probability function of `PD(alpha, 0)`:
/// `alpha^{k-1} (k-1)! prod_j (1-alpha)_{n_j - 1} / (n-1)!`.
pub fn pd_eppf(alpha: f64, labels: &[usize]) -> f64 {
    let n = labels.len();
    if n == 0 {
        return 1.0;
    }
    let k = labels.iter().max().unwrap() + 1;
    let mut sizes = vec![0usize; k];
    for &b in labels {
        sizes[b] += 1;
    }
    let factorial = |m: usize| (1..=m).map(|i| i as f64).product::<f64>();
    let blocks: f64 = sizes.iter().map(|&s| rising(1.0 - alpha, s - 1)).product();
    alpha.powi(k as i32 - 1) * factorial(k - 1) * blocks / factorial(n - 1)
}

/// Joint law of the overlaps of `n` replicas drawn i.i.d. from the weights
/// of an (untruncated) cascade with parameter `x`: a list of
/// `(probability, overlap matrix)`.
///
/// Replicas at the same atom form a `PD(x_L)` partition; the partition at
/// level `l` coagulates level `l + 1` by `PD(x_l / x_{l+1})`. Replicas first
/// separated below level `l` have overlap `q_l`.
pub fn cascade_overlap_law(x: &ParametricCdf, n: usize) -> Vec<(f64, Vec<Vec<f64>>)> {
    let atoms = x.atoms();
    let levels = atoms.len();
    let mut cumulative = Vec::with_capacity(levels);
    let mut acc = 0.0;
    for &(_, m) in atoms {
        acc += m;
        cumulative.push(acc);
    }
    let mut out = Vec::new();
    // state: probability, block of each replica at the current level, overlap
    let mut states: Vec<(f64, Vec<usize>, Vec<Vec<f64>>)> = Vec::new();
    for fine in set_partitions(n) {
        let p = pd_eppf(cumulative[levels - 1], &fine);
        let mut q = vec![vec![f64::NAN; n]; n];
        for a in 0..n {
            for b in 0..n {
                if fine[a] == fine[b] {
                    q[a][b] = 1.0;
                }
            }
        }
        states.push((p, fine, q));
    }
    for l in (0..levels).rev() {
        let mut next = Vec::new();
        for (p, blocks, q) in states {
            if l == 0 {
                let mut q = q;
                for a in 0..n {
                    for b in 0..n {
                        if q[a][b].is_nan() {
                            q[a][b] = atoms[0].0;
                        }
                    }
                }
                next.push((p, blocks, q));
                continue;
            }
            let k = blocks.iter().max().unwrap() + 1;
            let ratio = cumulative[l - 1] / cumulative[l];
            for coarse in set_partitions(k) {
                let pc = pd_eppf(ratio, &coarse);
                let merged: Vec<usize> = blocks.iter().map(|&b| coarse[b]).collect();
                let mut q = q.clone();
                for a in 0..n {
                    for b in 0..n {
                        if q[a][b].is_nan() && merged[a] == merged[b] {
                            q[a][b] = atoms[l].0;
                        }
                    }
                }
                next.push((p * pc, merged, q));
            }
        }
        states = next;
    }
    for (p, _, q) in states {
        out.push((p, q));
    }
    out
}

/// `E^(n)[f(Q)]` under the cascade law.
pub fn cascade_expectation(x: &ParametricCdf, n: usize, f: impl Fn(&[Vec<f64>]) -> f64) -> f64 {
    cascade_overlap_law(x, n).iter().map(|(p, q)| p * f(q)).sum()
}

/// Probability under the Bolthausen-Sznitman coalescent of a given sequence
/// of mergers: product of `lambda_{b,k} / (b - 1)` over the steps.
pub fn merger_chain_probability(sizes_and_blocks: &[(usize, usize)]) -> f64 {
    sizes_and_blocks
        .iter()
        .map(|&(b, k)| rost_core::samplers::merge_rate(b, k) / (b as f64 - 1.0))
        .product()
}

/// `(lambda^2 / 2) sum_l m_l (1 - q_l^r)`.
pub fn pressure_closed_form(x: &ParametricCdf, r: u32, lambda: f64) -> f64 {
    lambda * lambda / 2.0 * x.moment_gap(r)
}

pub fn one_level() -> ParametricCdf {
    ParametricCdf::one_level(0.5, 0.5).unwrap()
}

pub fn two_level() -> ParametricCdf {
    ParametricCdf::for_cascade(vec![(0.3, 0.25), (0.7, 0.25)]).unwrap()
}
