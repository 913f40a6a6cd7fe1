use std::fmt;
use std::sync::Arc;

use crate::numerics::DualScalar;

use super::BarrierError;

type TaylorEval = dyn Fn(f64, usize) -> f64 + Send + Sync;

/// Class-K function: strictly increasing on `[0, inf)` with `alpha(0) = 0`.
///
/// Negative arguments use the odd extension, so `Quadratic` is `c s |s|`
/// and `Power` is `c sgn(s) |s|^k`. Outside the safe set this pushes back
/// instead of relaxing the constraint.
#[derive(Clone)]
pub enum ClassK {
    Linear(f64),
    Quadratic(f64),
    Power { coefficient: f64, exponent: f64 },
    /// User supplied: `derivative(s, j)` returns the `j`-th derivative at `s`
    /// (`j = 0` is the value).
    Custom {
        name: String,
        derivative: Arc<TaylorEval>,
    },
}

impl fmt::Debug for ClassK {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassK::Linear(c) => write!(f, "Linear({c})"),
            ClassK::Quadratic(c) => write!(f, "Quadratic({c})"),
            ClassK::Power {
                coefficient,
                exponent,
            } => write!(f, "Power({coefficient}, {exponent})"),
            ClassK::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl ClassK {
    pub fn custom(
        name: impl Into<String>,
        derivative: impl Fn(f64, usize) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ClassK::Custom {
            name: name.into(),
            derivative: Arc::new(derivative),
        }
    }

    pub fn eval(&self, s: &DualScalar) -> DualScalar {
        match self {
            ClassK::Linear(c) => s * *c,
            ClassK::Quadratic(c) => (s * &s.abs()) * *c,
            ClassK::Power {
                coefficient,
                exponent,
            } => {
                let mag = s.abs().powf(*exponent) * *coefficient;
                if s.value() < 0.0 {
                    -mag
                } else {
                    mag
                }
            }
            ClassK::Custom { derivative, .. } => s.apply_taylor(|x, j| {
                derivative(x, j) / (1..=j).fold(1.0, |acc, k| acc * k as f64)
            }),
        }
    }

    pub fn eval_real(&self, s: f64) -> f64 {
        self.eval(&DualScalar::constant(s)).value()
    }

    /// Spot-checks `alpha(0) = 0` and strict monotonicity on a grid over
    /// `[0, 100]`.
    pub fn validate(&self) -> Result<(), BarrierError> {
        match self {
            ClassK::Linear(c) | ClassK::Quadratic(c) if !(c.is_finite() && *c > 0.0) => {
                return Err(BarrierError::InvalidClassK(format!("{self:?}")));
            }
            ClassK::Power {
                coefficient,
                exponent,
            } if !(coefficient.is_finite() && *coefficient > 0.0 && *exponent > 0.0) => {
                return Err(BarrierError::InvalidClassK(format!("{self:?}")));
            }
            _ => {}
        }
        if self.eval_real(0.0).abs() > 1e-12 {
            return Err(BarrierError::InvalidClassK(format!(
                "{self:?}: nonzero at 0"
            )));
        }
        let grid: Vec<f64> = (0..=200).map(|k| 0.5 * k as f64).collect();
        for pair in grid.windows(2) {
            let (a, b) = (self.eval_real(pair[0]), self.eval_real(pair[1]));
            if !(b > a) {
                return Err(BarrierError::InvalidClassK(format!(
                    "{self:?}: not increasing on [{}, {}]",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_are_class_k() {
        for k in [
            ClassK::Linear(1.0),
            ClassK::Quadratic(0.5),
            ClassK::Power {
                coefficient: 2.0,
                exponent: 3.0,
            },
        ] {
            k.validate().unwrap();
        }
    }

    #[test]
    fn bad_class_k_rejected() {
        assert!(ClassK::Linear(-1.0).validate().is_err());
        assert!(ClassK::custom("shifted", |s, j| if j == 0 { s + 1.0 } else if j == 1 { 1.0 } else { 0.0 })
            .validate()
            .is_err());
        assert!(ClassK::custom("decreasing", |s, j| if j == 0 { -s } else if j == 1 { -1.0 } else { 0.0 })
            .validate()
            .is_err());
    }

    #[test]
    fn custom_uses_supplied_derivatives() {
        // alpha(s) = s^3 + s
        let k = ClassK::custom("cubic", |s, j| match j {
            0 => s * s * s + s,
            1 => 3.0 * s * s + 1.0,
            2 => 6.0 * s,
            3 => 6.0,
            _ => 0.0,
        });
        k.validate().unwrap();
        let s = DualScalar::variable(2.0, 1.0).nest(&DualScalar::variable(1.0, 0.0));
        let y = k.eval(&s);
        assert_eq!(y.coeffs(), &[10.0, 13.0, 13.0, 12.0]);
    }

    #[test]
    fn quadratic_derivative() {
        let y = ClassK::Quadratic(1.0).eval(&DualScalar::variable(90.0, 1.0));
        assert_eq!(y.coeffs(), &[8100.0, 180.0]);
        let y = ClassK::Quadratic(2.0).eval(&DualScalar::variable(-3.0, 1.0));
        assert_eq!(y.coeffs(), &[-18.0, 12.0]);
    }
}
