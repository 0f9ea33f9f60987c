//! Small statistical helpers: one-sample Kolmogorov-Smirnov test, normal
//! quantiles, composite Simpson quadrature, z-scores.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// Outcome of a one-sample Kolmogorov-Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Tests `samples` against a continuous distribution function `cdf`.
///
/// The p-value uses the asymptotic Kolmogorov distribution with the
/// small-sample correction `sqrt(n) + 0.12 + 0.11 / sqrt(n)`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<KsOutcome> {
    if samples.is_empty() {
        return Err(Error::invalid("KS test needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("KS test samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let sqrt_n = nf.sqrt();
    let p_value = kolmogorov_survival((sqrt_n + 0.12 + 0.11 / sqrt_n) * d);
    Ok(KsOutcome {
        statistic: d,
        p_value,
        n,
    })
}

/// `P(K > t)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 0.3 {
        // the alternating series converges slowly here; the tail is 1 to
        // double precision
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Two-sided Bonferroni critical value for `m` tests at family level `alpha`.
pub fn bonferroni_threshold(alpha: f64, m: usize) -> f64 {
    normal_quantile(1.0 - alpha / (2.0 * m as f64))
}

/// Composite Simpson rule with `intervals` (rounded up to even) sub-intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = (intervals.max(2) + 1) & !1;
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `(a - b) / sqrt(se_a^2 + se_b^2)`; zero when both errors vanish and the
/// values agree, infinite when only the errors vanish.
pub fn z_score(a: f64, se_a: f64, b: f64, se_b: f64) -> f64 {
    let se = (se_a * se_a + se_b * se_b).sqrt();
    let diff = a - b;
    if se > 0.0 {
        diff / se
    } else if diff == 0.0 {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;
    use rand_distr::{Distribution, Exp1};

    #[test]
    fn ks_accepts_true_law_and_rejects_wrong_one() {
        let mut rng = Seed(5).rng();
        let xs: Vec<f64> = (0..5000).map(|_| Exp1.sample(&mut rng)).collect();
        let good = ks_one_sample(&xs, |x| 1.0 - (-x).exp()).unwrap();
        assert!(good.p_value > 0.01, "{good:?}");
        let bad = ks_one_sample(&xs, |x| 1.0 - (-1.2 * x).exp()).unwrap();
        assert!(bad.p_value < 1e-6, "{bad:?}");
    }

    #[test]
    fn ks_p_values_are_roughly_uniform() {
        // under the null, P(p < 0.1) should be near 0.1
        let mut rng = Seed(6).rng();
        let trials = 400;
        let mut small = 0;
        for _ in 0..trials {
            let xs: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
            if ks_one_sample(&xs, |x| x.clamp(0.0, 1.0)).unwrap().p_value < 0.1 {
                small += 1;
            }
        }
        let frac = small as f64 / trials as f64;
        assert!((frac - 0.1).abs() < 0.05, "{frac}");
    }

    #[test]
    fn kolmogorov_known_values() {
        // P(K > 1.36) is about 0.049
        assert!((kolmogorov_survival(1.36) - 0.0494).abs() < 1e-3);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn quantile_and_threshold() {
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-5);
        let t = bonferroni_threshold(0.01, 12);
        assert!((t - 3.34).abs() < 0.01, "{t}");
    }

    #[test]
    fn simpson_integrates_gaussian_moments() {
        let total = simpson(normal_pdf, -12.0, 12.0, 2000);
        assert!((total - 1.0).abs() < 1e-12);
        let mgf = simpson(|z| normal_pdf(z) * (0.7 * z).exp(), -12.0, 12.0, 2000);
        assert!((mgf.ln() - 0.245).abs() < 1e-10);
    }

    #[test]
    fn z_score_edge_cases() {
        assert_eq!(z_score(1.0, 0.0, 1.0, 0.0), 0.0);
        assert!(z_score(1.0, 0.0, 0.0, 0.0).is_infinite());
        assert!((z_score(1.0, 0.3, 0.0, 0.4) - 2.0).abs() < 1e-12);
    }
}
