use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bounded function `F_s` of the overlaps among `s` sampled replicas.
///
/// Replica slots in pairs are 1-based, `(l, l')` with `1 <= l < l' <= s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservableSpec {
    pub s: usize,
    pub form: ObservableForm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObservableForm {
    /// `F = 1`.
    Constant,
    /// `F = prod q_{l l'}^p`.
    Monomial { factors: Vec<MonomialFactor> },
    /// `F = prod 1{q_{l l'} <= threshold}` (or `>=`).
    Indicator { conditions: Vec<Condition> },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonomialFactor {
    pub pair: (usize, usize),
    pub power: u32,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Condition {
    pub pair: (usize, usize),
    pub threshold: f64,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    AtMost,
    AtLeast,
}

impl ObservableSpec {
    pub fn constant(s: usize) -> Self {
        ObservableSpec {
            s,
            form: ObservableForm::Constant,
        }
    }

    /// `q_{l l'}^power`.
    pub fn monomial(s: usize, pair: (usize, usize), power: u32) -> Self {
        ObservableSpec {
            s,
            form: ObservableForm::Monomial {
                factors: vec![MonomialFactor { pair, power }],
            },
        }
    }

    /// Product of `1{q_pair <= threshold}` over `pairs`.
    pub fn indicator_at_most(s: usize, pairs: &[(usize, usize)], threshold: f64) -> Self {
        ObservableSpec {
            s,
            form: ObservableForm::Indicator {
                conditions: pairs
                    .iter()
                    .map(|&pair| Condition {
                        pair,
                        threshold,
                        direction: Direction::AtMost,
                    })
                    .collect(),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.s == 0 {
            return Err(Error::invalid("observable needs s >= 1"));
        }
        let check_pair = |(a, b): (usize, usize)| {
            if a >= 1 && a < b && b <= self.s {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "pair ({a},{b}) must satisfy 1 <= l < l' <= s = {}",
                    self.s
                )))
            }
        };
        match &self.form {
            ObservableForm::Constant => Ok(()),
            ObservableForm::Monomial { factors } => factors.iter().try_for_each(|f| {
                check_pair(f.pair)?;
                if f.power == 0 {
                    return Err(Error::invalid("monomial powers must be >= 1"));
                }
                Ok(())
            }),
            ObservableForm::Indicator { conditions } => conditions.iter().try_for_each(|c| {
                check_pair(c.pair)?;
                if !c.threshold.is_finite() {
                    return Err(Error::invalid("indicator threshold must be finite"));
                }
                Ok(())
            }),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.form, ObservableForm::Constant)
    }

    /// Evaluates `F` given the overlap of 0-based slots.
    #[inline]
    pub fn eval(&self, q: impl Fn(usize, usize) -> f64) -> f64 {
        match &self.form {
            ObservableForm::Constant => 1.0,
            ObservableForm::Monomial { factors } => factors
                .iter()
                .map(|f| q(f.pair.0 - 1, f.pair.1 - 1).powi(f.power as i32))
                .product(),
            ObservableForm::Indicator { conditions } => {
                let hit = conditions.iter().all(|c| {
                    let v = q(c.pair.0 - 1, c.pair.1 - 1);
                    match c.direction {
                        Direction::AtMost => v <= c.threshold,
                        Direction::AtLeast => v >= c.threshold,
                    }
                });
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluation() {
        let q = |a: usize, b: usize| [[1.0, 0.5, 0.2], [0.5, 1.0, 0.3], [0.2, 0.3, 1.0]][a][b];
        assert_eq!(ObservableSpec::constant(3).eval(q), 1.0);
        assert_eq!(ObservableSpec::monomial(3, (1, 2), 2).eval(q), 0.25);
        let ind = ObservableSpec::indicator_at_most(3, &[(1, 3), (2, 3)], 0.3);
        assert_eq!(ind.eval(q), 1.0);
        let ind = ObservableSpec::indicator_at_most(3, &[(1, 2), (2, 3)], 0.3);
        assert_eq!(ind.eval(q), 0.0);
    }

    #[test]
    fn validation() {
        assert!(ObservableSpec::monomial(2, (1, 3), 1).validate().is_err());
        assert!(ObservableSpec::monomial(2, (2, 1), 1).validate().is_err());
        assert!(ObservableSpec::monomial(2, (1, 2), 0).validate().is_err());
        assert!(ObservableSpec::constant(0).validate().is_err());
        assert!(ObservableSpec::indicator_at_most(3, &[(1, 2)], 0.3).validate().is_ok());
    }

    #[test]
    fn serde_roundtrip() {
        let spec = ObservableSpec::indicator_at_most(3, &[(1, 2)], 0.3);
        let text = serde_json::to_string(&spec).unwrap();
        assert!(text.contains("\"kind\":\"indicator\""));
        assert_eq!(serde_json::from_str::<ObservableSpec>(&text).unwrap(), spec);
    }
}
