use std::fmt;
use std::sync::Arc;

use crate::numerics::{self, Matrix, Vector};

use super::{AdaCbfSpec, BarrierError, ClfSpec, DecisionLayout, Result, TopPenalty};

type CostEval = dyn Fn(&[f64]) -> (Matrix, Vector) + Send + Sync;

/// State-dependent quadratic cost `1/2 u' H_u(z) u + F_u(z)' u` on the plant
/// input block.
#[derive(Clone)]
pub struct ControlCost {
    q: usize,
    f: Arc<CostEval>,
}

impl fmt::Debug for ControlCost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ControlCost").field("q", &self.q).finish()
    }
}

impl ControlCost {
    pub fn new(q: usize, f: impl Fn(&[f64]) -> (Matrix, Vector) + Send + Sync + 'static) -> Self {
        Self { q, f: Arc::new(f) }
    }

    /// Minimum-norm cost `1/2 |u|^2`.
    pub fn identity(q: usize) -> Self {
        Self::new(q, move |_| (Matrix::identity(q, q), Vector::zeros(q)))
    }

    pub fn input_dim(&self) -> usize {
        self.q
    }

    pub fn eval(&self, z: &[f64]) -> Result<(Matrix, Vector)> {
        let (h, f) = (self.f)(z);
        numerics::check_dim("control cost rows", self.q, h.nrows())?;
        numerics::check_dim("control cost cols", self.q, h.ncols())?;
        numerics::check_dim("control cost linear term", self.q, f.len())?;
        numerics::check_finite("control cost", h.as_slice())?;
        numerics::check_finite("control cost", f.as_slice())?;
        Ok((h, f))
    }
}

/// Full QP cost over a [`DecisionLayout`]:
/// plant block, `w_k delta_k^2` per CLF slack, `W_i nu_i + P_i delta_i^2` per
/// chain and `Q (p_m - p_m^*)^2` for a decision top penalty.
#[derive(Clone, Debug)]
pub struct CostModel {
    pub control: ControlCost,
    pub clf_weights: Vec<f64>,
    /// `(W_i, P_i)` per chain.
    pub chain_weights: Vec<(f64, f64)>,
    /// `(Q, p_m^*)`.
    pub top: Option<(f64, f64)>,
}

impl CostModel {
    pub fn new(control: ControlCost, clfs: &[ClfSpec], spec: Option<&AdaCbfSpec>) -> Self {
        let chain_weights = spec
            .map(|s| {
                s.adaptive_levels()
                    .iter()
                    .map(|(_, a)| (a.nu_weight, a.slack_weight))
                    .collect()
            })
            .unwrap_or_default();
        let top = spec.and_then(|s| match s.top {
            TopPenalty::Decision { target, weight, .. } => Some((weight, target)),
            TopPenalty::Fixed(_) => None,
        });
        Self {
            control,
            clf_weights: clfs.iter().map(|c| c.slack_weight).collect(),
            chain_weights,
            top,
        }
    }

    /// `(H, F)` of `1/2 w' H w + F' w`; the constant of the top penalty term
    /// is dropped.
    pub fn assemble(&self, layout: &DecisionLayout, z: &[f64]) -> Result<(Matrix, Vector)> {
        if layout.clf_slacks() != self.clf_weights.len()
            || layout.chains() != self.chain_weights.len()
            || layout.top().is_some() != self.top.is_some()
        {
            return Err(BarrierError::Spec(
                "cost model does not match the decision layout".into(),
            ));
        }
        let d = layout.dim();
        let mut h = Matrix::zeros(d, d);
        let mut f = Vector::zeros(d);
        let (hu, fu) = self.control.eval(z)?;
        numerics::check_dim("control cost inputs", layout.inputs(), hu.nrows())?;
        h.view_mut((0, 0), (layout.inputs(), layout.inputs()))
            .copy_from(&hu);
        f.rows_mut(0, layout.inputs()).copy_from(&fu);
        for (k, &w) in self.clf_weights.iter().enumerate() {
            let i = layout.clf_slack(k);
            h[(i, i)] = 2.0 * w;
        }
        for (c, &(nu_w, slack_w)) in self.chain_weights.iter().enumerate() {
            f[layout.nu(c)] = nu_w;
            let i = layout.penalty_slack(c);
            h[(i, i)] = 2.0 * slack_w;
        }
        if let (Some((weight, target)), Some(i)) = (self.top, layout.top()) {
            h[(i, i)] = 2.0 * weight;
            f[i] = -2.0 * weight * target;
        }
        Ok((h, f))
    }
}
