use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::weights::RankedWeights;

/// Number of sticks generated per retained atom.
pub const STICK_OVERSAMPLING: usize = 8;

/// Top-`n` atoms of a Poisson-Dirichlet `PD(alpha, 0)` sample, renormalized.
///
/// Stick-breaking with `V_i ~ Beta(1 - alpha, i alpha)` produces the atoms
/// in size-biased order; `8 n` sticks are generated, sorted, and the largest
/// `n` kept. The sticks are drawn sequentially from `rng`, so the first
/// `8 n` sticks of a larger request coincide with those of a smaller one.
pub fn sample_poisson_dirichlet<R: Rng + ?Sized>(
    alpha: f64,
    n: usize,
    rng: &mut R,
) -> Result<RankedWeights> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid(format!(
            "Poisson-Dirichlet parameter alpha = {alpha} outside (0, 1)"
        )));
    }
    if n == 0 {
        return Err(Error::invalid("number of atoms must be positive"));
    }
    let sticks = STICK_OVERSAMPLING * n;
    let mut atoms = Vec::with_capacity(sticks);
    let mut remaining = 1.0f64;
    for i in 1..=sticks {
        let beta = Beta::new(1.0 - alpha, i as f64 * alpha)
            .map_err(|e| Error::NumericalFailure(format!("stick {i}: {e}")))?;
        let v: f64 = beta.sample(rng);
        atoms.push(remaining * v);
        remaining *= 1.0 - v;
    }
    atoms.sort_by(|a, b| b.total_cmp(a));
    atoms.truncate(n);
    let total: f64 = atoms.iter().sum();
    if !(total > 0.0) {
        return Err(Error::NumericalFailure(
            "all retained stick masses vanish".into(),
        ));
    }
    for a in &mut atoms {
        *a /= total;
    }
    Ok(RankedWeights::from_sorted_unchecked(atoms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    #[test]
    fn rejects_bad_alpha() {
        let mut rng = Seed(1).rng();
        for a in [0.0, 1.0, -0.5, f64::NAN] {
            assert!(matches!(
                sample_poisson_dirichlet(a, 8, &mut rng),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn output_is_ranked_and_normalized() {
        let mut rng = Seed(2).rng();
        for alpha in [0.05, 0.5, 0.95] {
            let w = sample_poisson_dirichlet(alpha, 64, &mut rng).unwrap();
            assert!(RankedWeights::new(w.as_slice().to_vec()).is_ok());
        }
    }

    #[test]
    fn prefix_of_sticks_is_shared() {
        let small = sample_poisson_dirichlet(0.5, 64, &mut Seed(9).rng()).unwrap();
        let large = sample_poisson_dirichlet(0.5, 128, &mut Seed(9).rng()).unwrap();
        // same leading atoms up to the renormalization constant
        let ratio = large.as_slice()[0] / small.as_slice()[0];
        for i in 0..10 {
            let r = large.as_slice()[i] / small.as_slice()[i];
            assert!((r - ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn second_moment_matches() {
        let mut rng = Seed(3).rng();
        let reps = 4000;
        let m: f64 = (0..reps)
            .map(|_| sample_poisson_dirichlet(0.3, 128, &mut rng).unwrap().power_sum(2))
            .sum::<f64>()
            / reps as f64;
        assert!((m - 0.7).abs() < 0.015, "{m}");
    }
}
