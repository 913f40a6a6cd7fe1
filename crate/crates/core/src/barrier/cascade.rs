use crate::numerics::{self, lift, DualScalar, NumericsError, ScalarFn};
use crate::system::AffineControlSystem;

use super::{BarrierError, ClassK};

/// Where the penalty multiplying `alpha_i` comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum PenaltySource {
    Const(f64),
    /// Index into the augmented state.
    State(usize),
}

/// The functions `psi_0 = b`, `psi_i = L_F psi_{i-1} + p_i alpha_i(psi_{i-1})`
/// over an augmented state, evaluated with nested duals.
#[derive(Clone, Debug)]
pub struct Cascade {
    barrier: ScalarFn,
    sys: AffineControlSystem,
    alphas: Vec<ClassK>,
    penalties: Vec<PenaltySource>,
    max_depth: usize,
}

/// Values needed for a linear-in-input constraint on the top of a cascade.
#[derive(Clone, Debug, PartialEq)]
pub struct LieTerms {
    /// `psi_{m-1}(z)`
    pub psi_top: f64,
    /// `L_F psi_{m-1}(z)`
    pub along_drift: f64,
    /// `L_{G_j} psi_{m-1}(z)` for every input column `j`.
    pub along_inputs: Vec<f64>,
}

impl Cascade {
    /// `penalties` covers levels `1..m-1`; `alphas` covers `1..m`.
    pub fn new(
        barrier: ScalarFn,
        sys: AffineControlSystem,
        alphas: Vec<ClassK>,
        penalties: Vec<PenaltySource>,
        max_depth: usize,
    ) -> Result<Self, BarrierError> {
        if barrier.arity() > sys.state_dim() {
            return Err(NumericsError::DimensionMismatch {
                context: "barrier arity",
                expected: sys.state_dim(),
                found: barrier.arity(),
            }
            .into());
        }
        if alphas.len() != penalties.len() + 1 {
            return Err(BarrierError::Spec(format!(
                "cascade needs {} class-K functions, got {}",
                penalties.len() + 1,
                alphas.len()
            )));
        }
        let levels = penalties.len();
        if levels > max_depth {
            return Err(NumericsError::DepthExceeded {
                requested: levels,
                max: max_depth,
            }
            .into());
        }
        Ok(Self {
            barrier,
            sys,
            alphas,
            penalties,
            max_depth,
        })
    }

    pub fn relative_degree(&self) -> usize {
        self.penalties.len() + 1
    }

    pub fn alphas(&self) -> &[ClassK] {
        &self.alphas
    }

    pub fn system(&self) -> &AffineControlSystem {
        &self.sys
    }

    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    fn penalty(&self, level: usize, z: &[DualScalar]) -> DualScalar {
        match &self.penalties[level - 1] {
            PenaltySource::Const(c) => DualScalar::constant(*c),
            PenaltySource::State(i) => z[*i].clone(),
        }
    }

    fn psi_dual(&self, level: usize, z: &[DualScalar]) -> DualScalar {
        if level == 0 {
            return self.barrier.eval(&z[..self.barrier.arity()]);
        }
        let drift = self.sys.drift_dual(z);
        let k = z
            .iter()
            .chain(&drift)
            .map(DualScalar::order)
            .max()
            .unwrap_or(0);
        let nested: Vec<DualScalar> = z
            .iter()
            .zip(&drift)
            .map(|(zi, fi)| zi.nest_at(fi, k))
            .collect();
        let (prev, lie) = self.psi_dual(level - 1, &nested).split_at(k);
        lie + self.penalty(level, z) * self.alphas[level - 1].eval(&prev)
    }

    /// `psi_level` as a standalone differentiable function of `z`.
    pub fn level_fn(&self, level: usize) -> Result<ScalarFn, BarrierError> {
        if level > self.penalties.len() {
            return Err(BarrierError::Spec(format!(
                "cascade level {level} out of range"
            )));
        }
        let this = self.clone();
        Ok(ScalarFn::new(self.sys.state_dim(), move |z| {
            this.psi_dual(level, z)
        }))
    }

    /// `[psi_0(z), ..., psi_{m-1}(z)]`.
    pub fn values(&self, z: &[f64]) -> Result<Vec<f64>, BarrierError> {
        numerics::check_dim("cascade state", self.sys.state_dim(), z.len())?;
        let zd = lift(z);
        let vals: Vec<f64> = (0..=self.penalties.len())
            .map(|i| self.psi_dual(i, &zd).value())
            .collect();
        numerics::check_finite("psi cascade", &vals)?;
        Ok(vals)
    }

    /// Lie derivatives of the top function `psi_{m-1}` along drift and input
    /// columns of the augmented system.
    pub fn lie_terms(&self, z: &[f64]) -> Result<LieTerms, BarrierError> {
        numerics::check_dim("cascade state", self.sys.state_dim(), z.len())?;
        let top = self.level_fn(self.penalties.len())?;
        let psi_top = top.eval_real(z)?;
        let drift = self.sys.drift(z)?;
        let along_drift = numerics::directional_derivative(&top, z, drift.as_slice())?;
        let along_inputs = (0..self.sys.input_dim())
            .map(|j| {
                let col = self.sys.input_column(z, j)?;
                Ok(numerics::directional_derivative(&top, z, col.as_slice())?)
            })
            .collect::<Result<Vec<_>, BarrierError>>()?;
        Ok(LieTerms {
            psi_top,
            along_drift,
            along_inputs,
        })
    }

    /// `alpha_m(psi_{m-1}(z))`.
    pub fn top_alpha(&self, psi_top: f64) -> f64 {
        self.alphas[self.penalties.len()].eval_real(psi_top)
    }
}
