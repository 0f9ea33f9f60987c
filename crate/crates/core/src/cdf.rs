use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::EstimateWithError;

const MASS_TOL: f64 = 1e-12;

/// Distribution function of overlaps with finitely many atoms.
///
/// The atoms carry the mass strictly below `q = 1`; their total is `x(1-)`.
/// When `includes_diagonal` is set the remaining `1 - x(1-)` sits at `q = 1`
/// (self-overlaps), so that `x(1) = 1`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParametricCdf {
    atoms: Vec<(f64, f64)>,
    includes_diagonal: bool,
}

impl ParametricCdf {
    /// Atoms `(location, mass)` with strictly increasing locations in
    /// `[-1, 1)` and masses in `(0, 1]` summing to at most 1.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(q, m)) in atoms.iter().enumerate() {
            if !(-1.0..1.0).contains(&q) {
                return Err(Error::invalid(format!(
                    "atom {i}: location {q} outside [-1, 1)"
                )));
            }
            if !(m > 0.0 && m <= 1.0) {
                return Err(Error::invalid(format!(
                    "atom {i}: mass {m} outside (0, 1]"
                )));
            }
            if i > 0 && atoms[i - 1].0 >= q {
                return Err(Error::invalid(format!(
                    "atom {i}: locations must be strictly increasing"
                )));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        if total > 1.0 + MASS_TOL {
            return Err(Error::invalid(format!("atom masses sum to {total} > 1")));
        }
        Ok(ParametricCdf {
            atoms,
            includes_diagonal: true,
        })
    }

    /// Cascade parameter: a distribution function on `[0, 1]` with
    /// `0 < x(1-) < 1`.
    pub fn for_cascade(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let cdf = Self::new(atoms)?;
        let total = cdf.mass_below_one();
        if cdf.atoms.is_empty() || !(total > 0.0 && total < 1.0 - MASS_TOL) {
            return Err(Error::invalid(format!(
                "x(1-) = {total}; a cascade needs 0 < x(1-) < 1"
            )));
        }
        if cdf.atoms[0].0 < 0.0 {
            return Err(Error::invalid(
                "cascade overlaps must lie in [0, 1)".to_string(),
            ));
        }
        Ok(cdf)
    }

    /// Single atom of mass `mass` at `q`.
    pub fn one_level(q: f64, mass: f64) -> Result<Self> {
        Self::for_cascade(vec![(q, mass)])
    }

    pub fn without_diagonal(mut self) -> Self {
        self.includes_diagonal = false;
        self
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    pub fn includes_diagonal(&self) -> bool {
        self.includes_diagonal
    }

    /// `x(1-)`.
    pub fn mass_below_one(&self) -> f64 {
        self.atoms.iter().map(|a| a.1).sum()
    }

    /// Right-continuous evaluation `x(q)`.
    pub fn eval(&self, q: f64) -> f64 {
        if q >= 1.0 && self.includes_diagonal {
            return 1.0;
        }
        self.atoms
            .iter()
            .take_while(|a| a.0 <= q)
            .map(|a| a.1)
            .sum()
    }

    /// Right-continuous inverse `inf{q : x(q) >= u}` for `u` in `(0, 1]`.
    /// Levels above `x(1-)` map to `q = 1`.
    pub fn inverse(&self, u: f64) -> f64 {
        let mut acc = 0.0;
        for &(q, m) in &self.atoms {
            acc += m;
            if acc >= u {
                return q;
            }
        }
        1.0
    }

    /// `integral of (1 - q^r) dx(q)`; the self-overlap atom contributes 0.
    pub fn moment_gap(&self, r: u32) -> f64 {
        self.atoms
            .iter()
            .map(|&(q, m)| m * (1.0 - q.powi(r as i32)))
            .sum()
    }

    /// Nine equispaced points of `[0, 1]` plus every atom location `± 1e-6`.
    pub fn straddling_grid(&self) -> Vec<f64> {
        let mut grid: Vec<f64> = (0..9).map(|i| i as f64 / 8.0).collect();
        for &(q, _) in &self.atoms {
            grid.push(q - 1e-6);
            grid.push(q + 1e-6);
        }
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        grid
    }
}

/// Estimated overlap distribution function on a grid.
#[derive(Clone, Debug, Serialize)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub values: Vec<EstimateWithError>,
    pub includes_diagonal: bool,
}

impl EmpiricalCdf {
    /// Step evaluation: the value at the largest grid point `<= q`.
    pub fn eval(&self, q: f64) -> f64 {
        let k = self.grid.partition_point(|&g| g <= q);
        if k == 0 {
            0.0
        } else {
            self.values[k - 1].value
        }
    }
}

/// Either form of an overlap distribution function.
#[derive(Clone, Debug, Serialize)]
#[serde(tag = "form", rename_all = "kebab-case")]
pub enum OverlapCdf {
    Parametric(ParametricCdf),
    Empirical(EmpiricalCdf),
}

impl OverlapCdf {
    pub fn eval(&self, q: f64) -> f64 {
        match self {
            OverlapCdf::Parametric(p) => p.eval(q),
            OverlapCdf::Empirical(e) => e.eval(q),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn step_values_and_inverse() {
        let x = ParametricCdf::for_cascade(vec![(0.3, 0.25), (0.7, 0.25)]).unwrap();
        assert_eq!(x.eval(0.29), 0.0);
        assert_eq!(x.eval(0.3), 0.25);
        assert_eq!(x.eval(0.99), 0.5);
        assert_eq!(x.eval(1.0), 1.0);
        assert_eq!(x.inverse(0.1), 0.3);
        assert_eq!(x.inverse(0.25), 0.3);
        assert_eq!(x.inverse(0.26), 0.7);
        assert_eq!(x.inverse(0.6), 1.0);
        assert_eq!(x.without_diagonal().eval(1.0), 0.5);
    }

    #[test]
    fn cascade_validation() {
        assert!(ParametricCdf::for_cascade(vec![(0.5, 1.0)]).is_err());
        assert!(ParametricCdf::for_cascade(vec![(0.5, 0.6), (0.4, 0.2)]).is_err());
        assert!(ParametricCdf::for_cascade(vec![(-0.1, 0.2)]).is_err());
        assert!(ParametricCdf::for_cascade(vec![(0.5, 0.0)]).is_err());
        assert!(ParametricCdf::for_cascade(vec![]).is_err());
        assert!(ParametricCdf::for_cascade(vec![(0.0, 0.5)]).is_ok());
    }

    #[test]
    fn moment_gap_one_level() {
        let x = ParametricCdf::one_level(0.5, 0.5).unwrap();
        assert!((x.moment_gap(1) - 0.25).abs() < 1e-15);
        assert!((x.moment_gap(2) - 0.375).abs() < 1e-15);
    }

    fn arb_cdf() -> impl Strategy<Value = ParametricCdf> {
        prop::collection::vec((0.0f64..0.999, 0.01f64..1.0), 1..6).prop_filter_map(
            "valid atoms",
            |mut raw| {
                raw.sort_by(|a, b| a.0.total_cmp(&b.0));
                raw.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-9);
                let total: f64 = raw.iter().map(|a| a.1).sum();
                let scale = 0.95 / total.max(0.95);
                let atoms = raw.into_iter().map(|(q, m)| (q, m * scale)).collect();
                ParametricCdf::for_cascade(atoms).ok()
            },
        )
    }

    proptest! {
        #[test]
        fn galois_connection(x in arb_cdf(), u in 1e-9f64..1.0) {
            prop_assert!(x.eval(x.inverse(u)) >= u - 1e-12);
            for &(q, _) in x.atoms() {
                prop_assert!(x.inverse(x.eval(q)) <= q);
            }
        }
    }
}
