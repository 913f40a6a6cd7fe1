//! Control barrier and Lyapunov constraints for affine systems.
//!
//! High-order barriers (HOCBF) use fixed penalties on each class-K term.
//! Adaptive barriers (AdaCBF) replace some of those penalties by states of
//! auxiliary integrator chains, whose inputs `nu_i` join the QP decision
//! vector, and expose the top penalty `p_m` as a decision variable.
//! Every row is linear in the decision vector described by
//! [`DecisionLayout`].

mod cascade;
pub mod class_k;
mod cost;
mod rows;

use thiserror::Error;

use crate::numerics::{NumericsError, ScalarFn, DEFAULT_MAX_DEPTH};
use crate::system::{AffineControlSystem, AugmentedSystem, SystemError};

pub use cascade::{Cascade, LieTerms, PenaltySource};
pub use class_k::ClassK;
pub use cost::{ControlCost, CostModel};
pub use rows::{
    adacbf_row, clf_row, hocbf_row, penalty_clf_rows, penalty_hocbf_rows, satisfy_in_penalties,
    top_penalty_sign_row, validate_relative_degree, ConstraintRow, DecisionLayout, RowKind,
    Sense,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BarrierError {
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error("invalid class-K function: {0}")]
    InvalidClassK(String),
    #[error("invalid barrier specification: {0}")]
    Spec(String),
    #[error("relative degree mismatch for {label}: {detail}")]
    RelativeDegree { label: String, detail: String },
    #[error("penalty p_{level} is negative ({value})")]
    NegativePenalty { level: usize, value: f64 },
}

pub type Result<T, E = BarrierError> = std::result::Result<T, E>;

/// HOCBF with constant penalties: `psi_i = psi_{i-1}' + p_i alpha_i(psi_{i-1})`.
#[derive(Clone, Debug)]
pub struct HocbfSpec {
    pub barrier: ScalarFn,
    pub alphas: Vec<ClassK>,
    pub penalties: Vec<f64>,
    pub max_depth: usize,
}

impl HocbfSpec {
    /// Relative degree is `alphas.len()`; all penalties default to 1.
    pub fn new(barrier: ScalarFn, alphas: Vec<ClassK>) -> Result<Self> {
        let m = alphas.len();
        let spec = Self {
            barrier,
            alphas,
            penalties: vec![1.0; m],
            max_depth: DEFAULT_MAX_DEPTH,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_penalties(mut self, penalties: Vec<f64>) -> Result<Self> {
        self.penalties = penalties;
        self.validate()?;
        Ok(self)
    }

    pub fn relative_degree(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.alphas.is_empty() {
            return Err(BarrierError::Spec("relative degree must be >= 1".into()));
        }
        if self.penalties.len() != self.alphas.len() {
            return Err(BarrierError::Spec(format!(
                "expected {} penalties, got {}",
                self.alphas.len(),
                self.penalties.len()
            )));
        }
        if let Some(p) = self.penalties.iter().find(|p| !(p.is_finite() && **p > 0.0)) {
            return Err(BarrierError::Spec(format!("penalty {p} must be positive")));
        }
        self.alphas.iter().try_for_each(ClassK::validate)
    }

    pub fn cascade(&self, sys: &AffineControlSystem) -> Result<Cascade> {
        let m = self.relative_degree();
        Cascade::new(
            self.barrier.clone(),
            sys.clone(),
            self.alphas.clone(),
            self.penalties[..m - 1]
                .iter()
                .map(|&p| PenaltySource::Const(p))
                .collect(),
            self.max_depth,
        )
    }

    /// `[psi_0, ..., psi_{m-1}]` at `z`.
    pub fn psi(&self, sys: &AffineControlSystem, z: &[f64]) -> Result<Vec<f64>> {
        self.cascade(sys)?.values(z)
    }

    pub fn top_penalty(&self) -> f64 {
        self.penalties[self.penalties.len() - 1]
    }
}

/// Configuration of one adaptive penalty `p_i`, `i < m`, driven by an
/// integrator chain of length `m - i`.
#[derive(Clone, Debug)]
pub struct AdaptivePenalty {
    /// `p_i(0) > 0`; the remaining chain states start at zero.
    pub initial: f64,
    /// `p_i^*`
    pub target: f64,
    /// Class-K functions of the HOCBF keeping `p_i >= 0` (one per chain state).
    pub aux_alphas: Vec<ClassK>,
    /// State feedback gains `k_1 .. k_{L-1}` for chains of length `L > 1`.
    pub gains: Vec<f64>,
    /// CLF decay rate.
    pub clf_rate: f64,
    /// `W_i`, linear weight on `nu_i`.
    pub nu_weight: f64,
    /// `P_i`, quadratic weight on the CLF relaxation `delta_i`.
    pub slack_weight: f64,
}

impl AdaptivePenalty {
    /// Linear auxiliary alphas and unit gains for a chain of `len` states.
    pub fn with_defaults(len: usize, initial: f64, target: f64) -> Self {
        Self {
            initial,
            target,
            aux_alphas: vec![ClassK::Linear(1.0); len],
            gains: vec![1.0; len.saturating_sub(1)],
            clf_rate: 10.0,
            nu_weight: 2.0,
            slack_weight: 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum LevelPenalty {
    Fixed(f64),
    Adaptive(AdaptivePenalty),
}

#[derive(Clone, Debug, PartialEq)]
pub enum TopPenalty {
    Fixed(f64),
    /// `p_m >= 0` chosen by the QP with cost `weight (p_m - target)^2`.
    /// `initial` is the value used when the penalty is frozen.
    Decision {
        target: f64,
        weight: f64,
        initial: f64,
    },
}

/// Adaptive CBF of relative degree `m = alphas.len()`.
#[derive(Clone, Debug)]
pub struct AdaCbfSpec {
    pub barrier: ScalarFn,
    pub alphas: Vec<ClassK>,
    /// Penalties for levels `1..m-1`.
    pub levels: Vec<LevelPenalty>,
    pub top: TopPenalty,
    pub max_depth: usize,
}

impl AdaCbfSpec {
    pub fn new(
        barrier: ScalarFn,
        alphas: Vec<ClassK>,
        levels: Vec<LevelPenalty>,
        top: TopPenalty,
    ) -> Result<Self> {
        let spec = Self {
            barrier,
            alphas,
            levels,
            top,
            max_depth: DEFAULT_MAX_DEPTH,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn relative_degree(&self) -> usize {
        self.alphas.len()
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.alphas.len();
        if m == 0 {
            return Err(BarrierError::Spec("relative degree must be >= 1".into()));
        }
        if self.levels.len() + 1 != m {
            return Err(BarrierError::Spec(format!(
                "expected {} level penalties, got {}",
                m - 1,
                self.levels.len()
            )));
        }
        self.alphas.iter().try_for_each(ClassK::validate)?;
        let positive = |v: f64| v.is_finite() && v > 0.0;
        for (idx, level) in self.levels.iter().enumerate() {
            let i = idx + 1;
            match level {
                LevelPenalty::Fixed(p) if !positive(*p) => {
                    return Err(BarrierError::Spec(format!("p_{i} = {p} must be positive")));
                }
                LevelPenalty::Fixed(_) => {}
                LevelPenalty::Adaptive(a) => {
                    let len = m - i;
                    if !positive(a.initial) || !positive(a.target) {
                        return Err(BarrierError::Spec(format!(
                            "p_{i}(0) and p_{i}* must be positive"
                        )));
                    }
                    if a.aux_alphas.len() != len {
                        return Err(BarrierError::Spec(format!(
                            "p_{i} needs {len} auxiliary class-K functions"
                        )));
                    }
                    if a.gains.len() != len - 1 || !a.gains.iter().all(|&k| positive(k)) {
                        return Err(BarrierError::Spec(format!(
                            "p_{i} needs {} positive feedback gains",
                            len - 1
                        )));
                    }
                    if !positive(a.clf_rate) || !positive(a.nu_weight) || !positive(a.slack_weight)
                    {
                        return Err(BarrierError::Spec(format!(
                            "p_{i}: CLF rate and weights W, P must be positive"
                        )));
                    }
                    a.aux_alphas.iter().try_for_each(ClassK::validate)?;
                }
            }
        }
        match self.top {
            TopPenalty::Fixed(p) if !positive(p) => {
                Err(BarrierError::Spec(format!("p_{m} = {p} must be positive")))
            }
            TopPenalty::Decision {
                target,
                weight,
                initial,
            } if !positive(target) || !(weight.is_finite() && weight >= 0.0) || !positive(initial) => {
                Err(BarrierError::Spec(format!(
                    "p_{m}: target must be positive and weight Q >= 0"
                )))
            }
            _ => Ok(()),
        }
    }

    /// `(level i, chain index)` for every adaptive level.
    pub fn adaptive_levels(&self) -> Vec<(usize, &AdaptivePenalty)> {
        self.levels
            .iter()
            .enumerate()
            .filter_map(|(idx, l)| match l {
                LevelPenalty::Adaptive(a) => Some((idx + 1, a)),
                LevelPenalty::Fixed(_) => None,
            })
            .collect()
    }

    /// Chain lengths `m - i` for the adaptive levels, in level order.
    pub fn chain_lengths(&self) -> Vec<usize> {
        let m = self.relative_degree();
        self.adaptive_levels().iter().map(|(i, _)| m - i).collect()
    }

    pub fn augment(&self, base: &AffineControlSystem) -> Result<AugmentedSystem> {
        Ok(AugmentedSystem::augment(base, &self.chain_lengths())?)
    }

    /// Initial auxiliary state appended after `x`.
    pub fn initial_chain_state(&self) -> Vec<f64> {
        let m = self.relative_degree();
        let mut out = Vec::new();
        for (i, a) in self.adaptive_levels() {
            out.push(a.initial);
            out.extend(std::iter::repeat_n(0.0, m - i - 1));
        }
        out
    }

    pub(crate) fn check_chains(&self, aug: &AugmentedSystem) -> Result<()> {
        let lens = self.chain_lengths();
        if aug.chains().len() < lens.len() || aug.chains()[..lens.len()] != lens[..] {
            return Err(BarrierError::Spec(format!(
                "augmented system chains {:?} do not start with {:?}",
                aug.chains(),
                lens
            )));
        }
        Ok(())
    }

    pub fn cascade(&self, aug: &AugmentedSystem) -> Result<Cascade> {
        self.check_chains(aug)?;
        let mut chain = 0;
        let penalties = self
            .levels
            .iter()
            .map(|l| match l {
                LevelPenalty::Fixed(p) => PenaltySource::Const(*p),
                LevelPenalty::Adaptive(_) => {
                    let src = PenaltySource::State(aug.chain_offset(chain));
                    chain += 1;
                    src
                }
            })
            .collect();
        Cascade::new(
            self.barrier.clone(),
            aug.combined().clone(),
            self.alphas.clone(),
            penalties,
            self.max_depth,
        )
    }

    /// `[psi_0, ..., psi_{m-1}]` at the augmented state `z`.
    pub fn psi(&self, aug: &AugmentedSystem, z: &[f64]) -> Result<Vec<f64>> {
        self.cascade(aug)?.values(z)
    }

    /// Current value of every penalty `p_1..p_m` (state, fixed, or the given
    /// decision value for `p_m`).
    pub fn penalty_values(&self, aug: &AugmentedSystem, z: &[f64], top: Option<f64>) -> Vec<f64> {
        let mut chain = 0;
        let mut out: Vec<f64> = self
            .levels
            .iter()
            .map(|l| match l {
                LevelPenalty::Fixed(p) => *p,
                LevelPenalty::Adaptive(_) => {
                    let v = z[aug.chain_offset(chain)];
                    chain += 1;
                    v
                }
            })
            .collect();
        out.push(match self.top {
            TopPenalty::Fixed(p) => p,
            TopPenalty::Decision { initial, .. } => top.unwrap_or(initial),
        });
        out
    }

    /// The frozen-penalty HOCBF: every `p_i` fixed at its initial value.
    pub fn frozen(&self) -> HocbfSpec {
        let mut penalties: Vec<f64> = self
            .levels
            .iter()
            .map(|l| match l {
                LevelPenalty::Fixed(p) => *p,
                LevelPenalty::Adaptive(a) => a.initial,
            })
            .collect();
        penalties.push(match self.top {
            TopPenalty::Fixed(p) => p,
            TopPenalty::Decision { initial, .. } => initial,
        });
        HocbfSpec {
            barrier: self.barrier.clone(),
            alphas: self.alphas.clone(),
            penalties,
            max_depth: self.max_depth,
        }
    }

    /// Decision layout for this spec with `q` plant inputs and `clf_slacks`
    /// plant-level CLF relaxations.
    pub fn layout(&self, q: usize, clf_slacks: usize) -> DecisionLayout {
        DecisionLayout::new(
            q,
            clf_slacks,
            self.adaptive_levels().len(),
            matches!(self.top, TopPenalty::Decision { .. }),
        )
    }
}

/// Relaxed exponential CLF `L_f V + L_g V u + rate V <= delta`.
#[derive(Clone, Debug)]
pub struct ClfSpec {
    pub v: ScalarFn,
    pub rate: f64,
    /// Quadratic cost weight on the relaxation.
    pub slack_weight: f64,
}

impl ClfSpec {
    pub fn new(v: ScalarFn, rate: f64, slack_weight: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(BarrierError::Spec("CLF rate must be positive".into()));
        }
        if !(slack_weight.is_finite() && slack_weight > 0.0) {
            return Err(BarrierError::Spec("CLF relaxation weight must be positive".into()));
        }
        Ok(Self {
            v,
            rate,
            slack_weight,
        })
    }
}
