use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The increment function applied to the gaussian field.
///
/// `SmoothShifted` is `z -> log cosh(beta * z + h)`: its derivative `tanh`
/// and second derivative `sech^2` are globally bounded.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PsiSpec {
    Linear { lambda: f64 },
    SmoothShifted { beta: f64, h: f64 },
}

/// `log cosh x` without overflow.
#[inline]
pub fn log_cosh(x: f64) -> f64 {
    let a = x.abs();
    a + (-2.0 * a).exp().ln_1p() - std::f64::consts::LN_2
}

impl PsiSpec {
    pub fn linear(lambda: f64) -> Self {
        PsiSpec::Linear { lambda }
    }

    pub fn zero() -> Self {
        PsiSpec::Linear { lambda: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PsiSpec::Linear { lambda } if !lambda.is_finite() => {
                Err(Error::invalid(format!("lambda must be finite, got {lambda}")))
            }
            PsiSpec::SmoothShifted { beta, h } if !(beta >= 0.0 && beta.is_finite() && h.is_finite()) => {
                Err(Error::invalid(format!(
                    "smooth-shifted psi needs finite beta >= 0 and finite h, got beta={beta}, h={h}"
                )))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match *self {
            PsiSpec::Linear { lambda } => lambda * z,
            PsiSpec::SmoothShifted { beta, h } => log_cosh(beta * z + h),
        }
    }

    #[inline]
    pub fn deriv(&self, z: f64) -> f64 {
        match *self {
            PsiSpec::Linear { lambda } => lambda,
            PsiSpec::SmoothShifted { beta, h } => beta * (beta * z + h).tanh(),
        }
    }

    /// True when every increment is the same constant, so the tilt is the
    /// identity after normalization.
    pub fn is_constant(&self) -> bool {
        match *self {
            PsiSpec::Linear { lambda } => lambda == 0.0,
            PsiSpec::SmoothShifted { beta, .. } => beta == 0.0,
        }
    }

    /// Scaling `beta(T) = lambda / (|base'(h)| sqrt T)` under which `T` steps
    /// of the smooth evolution approach one linear step of slope `lambda`.
    pub fn clt_scaled(h: f64, lambda: f64, steps: usize) -> Result<Self> {
        let slope = h.tanh();
        if slope == 0.0 {
            return Err(Error::invalid(
                "base'(h) = 0; the scaling needs a nonzero slope at h",
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("number of steps must be positive"));
        }
        Ok(PsiSpec::SmoothShifted {
            beta: lambda.abs() / (slope.abs() * (steps as f64).sqrt()),
            h,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;
    use rand::Rng;

    #[test]
    fn linear_values() {
        let psi = PsiSpec::linear(2.0);
        assert_eq!(psi.eval(1.5), 3.0);
        assert_eq!(psi.deriv(-7.0), 2.0);
    }

    #[test]
    fn degenerate_scaling_is_constant() {
        let psi = PsiSpec::SmoothShifted { beta: 0.0, h: 0.7 };
        assert!(psi.is_constant());
        let c = log_cosh(0.7);
        for z in [-3.0, 0.0, 11.0] {
            assert_eq!(psi.eval(z), c);
        }
    }

    #[test]
    fn log_cosh_is_stable() {
        assert!((log_cosh(0.3) - 0.3f64.cosh().ln()).abs() < 1e-15);
        assert!((log_cosh(800.0) - (800.0 - std::f64::consts::LN_2)).abs() < 1e-9);
        assert!(log_cosh(-800.0).is_finite());
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let mut rng = Seed(3).rng();
        let eps = 1e-5;
        for _ in 0..100 {
            let psi = PsiSpec::SmoothShifted {
                beta: rng.random_range(0.0..3.0),
                h: rng.random_range(-2.0..2.0),
            };
            let z: f64 = rng.random_range(-5.0..5.0);
            let fd = (psi.eval(z + eps) - psi.eval(z - eps)) / (2.0 * eps);
            assert!((fd - psi.deriv(z)).abs() <= 1e-6, "z={z} psi={psi:?}");
        }
    }

    #[test]
    fn clt_scaling_rejects_flat_point() {
        assert!(PsiSpec::clt_scaled(0.0, 0.5, 64).is_err());
        let PsiSpec::SmoothShifted { beta, h } = PsiSpec::clt_scaled(1.0, 0.5, 64).unwrap() else {
            unreachable!()
        };
        assert_eq!(h, 1.0);
        assert!((beta - 0.5 / (1f64.tanh() * 8.0)).abs() < 1e-15);
    }
}
