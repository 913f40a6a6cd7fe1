//! Dense linear algebra aliases, differentiable evaluators and forward-mode
//! gradients.

mod dual;

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

pub use dual::DualScalar;

pub type Vector = nalgebra::DVector<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;

/// Default limit on nested derivative levels inside a barrier cascade.
pub const DEFAULT_MAX_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("nesting depth {requested} exceeds configured maximum {max}")]
    DepthExceeded { requested: usize, max: usize },
}

pub type Result<T, E = NumericsError> = std::result::Result<T, E>;

pub(crate) fn check_dim(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(NumericsError::DimensionMismatch {
            context,
            expected,
            found,
        })
    }
}

pub(crate) fn check_finite(context: &'static str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(NumericsError::NonFinite(context))
    }
}

type ScalarEval = dyn Fn(&[DualScalar]) -> DualScalar + Send + Sync;
type VectorEval = dyn Fn(&[DualScalar]) -> Vec<DualScalar> + Send + Sync;

/// Scalar function `R^arity -> R` that can be evaluated on nested duals.
#[derive(Clone)]
pub struct ScalarFn {
    arity: usize,
    f: Arc<ScalarEval>,
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarFn").field("arity", &self.arity).finish()
    }
}

impl ScalarFn {
    pub fn new(
        arity: usize,
        f: impl Fn(&[DualScalar]) -> DualScalar + Send + Sync + 'static,
    ) -> Self {
        Self {
            arity,
            f: Arc::new(f),
        }
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Raw evaluation; the caller guarantees `z.len() == arity`.
    pub fn eval(&self, z: &[DualScalar]) -> DualScalar {
        (self.f)(z)
    }

    pub fn eval_real(&self, z: &[f64]) -> Result<f64> {
        check_dim("scalar function input", self.arity, z.len())?;
        let zd: Vec<DualScalar> = z.iter().map(|&v| DualScalar::constant(v)).collect();
        let v = self.eval(&zd).value();
        check_finite("scalar function value", &[v])?;
        Ok(v)
    }
}

/// Vector function `R^input_dim -> R^output_dim` over nested duals.
///
/// Matrix-valued maps use this type with a row-major `rows * cols` output.
#[derive(Clone)]
pub struct VectorFn {
    input_dim: usize,
    output_dim: usize,
    f: Arc<VectorEval>,
}

impl fmt::Debug for VectorFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VectorFn")
            .field("input_dim", &self.input_dim)
            .field("output_dim", &self.output_dim)
            .finish()
    }
}

impl VectorFn {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        f: impl Fn(&[DualScalar]) -> Vec<DualScalar> + Send + Sync + 'static,
    ) -> Self {
        Self {
            input_dim,
            output_dim,
            f: Arc::new(f),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn eval(&self, z: &[DualScalar]) -> Vec<DualScalar> {
        (self.f)(z)
    }

    pub fn eval_real(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim("vector function input", self.input_dim, z.len())?;
        let zd = lift(z);
        let out: Vec<f64> = self.eval(&zd).iter().map(DualScalar::value).collect();
        check_dim("vector function output", self.output_dim, out.len())?;
        check_finite("vector function value", &out)?;
        Ok(out)
    }
}

/// Lifts real entries to order-0 duals.
pub fn lift(z: &[f64]) -> Vec<DualScalar> {
    z.iter().map(|&v| DualScalar::constant(v)).collect()
}

/// Gradient of `f` at `z` by seeding one unit tangent per coordinate.
pub fn gradient(f: &ScalarFn, z: &[f64]) -> Result<Vector> {
    check_dim("gradient point", f.arity(), z.len())?;
    check_finite("gradient point", z)?;
    let mut seeded = lift(z);
    let mut grad = Vector::zeros(z.len());
    for j in 0..z.len() {
        seeded[j] = DualScalar::variable(z[j], 1.0);
        let y = f.eval(&seeded);
        if !y.is_finite() {
            return Err(NumericsError::NonFinite("gradient evaluation"));
        }
        grad[j] = y.first_derivative();
        seeded[j] = DualScalar::constant(z[j]);
    }
    Ok(grad)
}

/// `grad f(z) . d` in a single dual pass.
pub fn directional_derivative(f: &ScalarFn, z: &[f64], d: &[f64]) -> Result<f64> {
    check_dim("directional derivative point", f.arity(), z.len())?;
    check_dim("directional derivative direction", z.len(), d.len())?;
    check_finite("directional derivative point", z)?;
    check_finite("directional derivative direction", d)?;
    let seeded: Vec<DualScalar> = z
        .iter()
        .zip(d)
        .map(|(&zi, &di)| DualScalar::variable(zi, di))
        .collect();
    let y = f.eval(&seeded);
    if !y.is_finite() {
        return Err(NumericsError::NonFinite("directional derivative evaluation"));
    }
    Ok(y.first_derivative())
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64> {
    check_dim("dot product", a.len(), b.len())?;
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

pub fn mat_vec(a: &Matrix, x: &[f64]) -> Result<Vector> {
    check_dim("matrix-vector product", a.ncols(), x.len())?;
    Ok(a * Vector::from_column_slice(x))
}
