use crate::barrier::{
    self, AdaCbfSpec, ClfSpec, ConstraintRow, ControlCost, CostModel, DecisionLayout, HocbfSpec,
    RowKind, Sense,
};
use crate::numerics::{Matrix, Vector};
use crate::qp::QpProblem;
use crate::system::{AffineControlSystem, AugmentedSystem, BoundsQuery, InputBounds};

use super::{Result, SimError};

/// The barrier that encodes the primary safety requirement.
#[derive(Clone, Debug)]
pub enum SafetyConstraint {
    Adaptive(AdaCbfSpec),
    /// Fixed-penalty HOCBF, for instance a frozen AdaCBF.
    Fixed(HocbfSpec),
    None,
}

/// One per-step QP with its rows in order.
#[derive(Clone, Debug)]
pub struct StepQp {
    pub problem: QpProblem,
    pub rows: Vec<ConstraintRow>,
}

impl StepQp {
    /// Index of the first row of the given kind.
    pub fn find(&self, kind: RowKind) -> Option<usize> {
        self.rows.iter().position(|r| r.kind == kind)
    }
}

/// CLF-CBF safety filter over the augmented system.
///
/// Row order: plant CLFs, auxiliary HOCBFs, input bounds, safety row,
/// penalty HOCBF rows, penalty CLF rows, `p_m >= 0`.
#[derive(Clone, Debug)]
pub struct SafetyFilter {
    aug: AugmentedSystem,
    layout: DecisionLayout,
    clfs: Vec<(String, ClfSpec)>,
    barriers: Vec<(String, HocbfSpec)>,
    safety: SafetyConstraint,
    cost: CostModel,
    bounds: InputBounds,
}

impl SafetyFilter {
    pub fn new(
        base: &AffineControlSystem,
        safety: SafetyConstraint,
        clfs: Vec<(String, ClfSpec)>,
        barriers: Vec<(String, HocbfSpec)>,
        control_cost: ControlCost,
        bounds: InputBounds,
    ) -> Result<Self> {
        let q = base.input_dim();
        if control_cost.input_dim() != q || bounds.input_dim() != q {
            return Err(SimError::Config(format!(
                "cost and bounds must cover {q} inputs"
            )));
        }
        let clf_specs: Vec<ClfSpec> = clfs.iter().map(|(_, c)| c.clone()).collect();
        let (aug, layout, cost) = match &safety {
            SafetyConstraint::Adaptive(spec) => (
                spec.augment(base)?,
                spec.layout(q, clfs.len()),
                CostModel::new(control_cost, &clf_specs, Some(spec)),
            ),
            SafetyConstraint::Fixed(_) | SafetyConstraint::None => (
                AugmentedSystem::augment(base, &[])?,
                DecisionLayout::new(q, clfs.len(), 0, false),
                CostModel::new(control_cost, &clf_specs, None),
            ),
        };
        Ok(Self {
            aug,
            layout,
            clfs,
            barriers,
            safety,
            cost,
            bounds,
        })
    }

    pub fn system(&self) -> &AugmentedSystem {
        &self.aug
    }

    pub fn layout(&self) -> &DecisionLayout {
        &self.layout
    }

    pub fn safety(&self) -> &SafetyConstraint {
        &self.safety
    }

    pub fn bounds(&self) -> &InputBounds {
        &self.bounds
    }

    /// `z(0)` from the plant state: penalty chains start at their initial
    /// values.
    pub fn initial_state(&self, x0: &[f64]) -> Vec<f64> {
        let mut z = x0.to_vec();
        if let SafetyConstraint::Adaptive(spec) = &self.safety {
            z.extend(spec.initial_chain_state());
        }
        z
    }

    /// Safety cascade `[psi_0, ..., psi_{m-1}]` (empty without a safety
    /// barrier).
    pub fn psi(&self, z: &[f64]) -> Result<Vec<f64>> {
        Ok(match &self.safety {
            SafetyConstraint::Adaptive(spec) => spec.psi(&self.aug, z)?,
            SafetyConstraint::Fixed(spec) => spec.psi(self.aug.combined(), z)?,
            SafetyConstraint::None => Vec::new(),
        })
    }

    /// `p_1 .. p_m` at `z`; `top` is the solved `p_m` when it is a decision.
    pub fn penalties(&self, z: &[f64], top: Option<f64>) -> Vec<f64> {
        match &self.safety {
            SafetyConstraint::Adaptive(spec) => spec.penalty_values(&self.aug, z, top),
            SafetyConstraint::Fixed(spec) => spec.penalties.clone(),
            SafetyConstraint::None => Vec::new(),
        }
    }

    /// State-dependent rows, without input bounds.
    pub fn state_rows(&self, z: &[f64]) -> Result<(Vec<ConstraintRow>, Vec<ConstraintRow>)> {
        let mut head = Vec::new();
        for (k, (label, clf)) in self.clfs.iter().enumerate() {
            head.push(barrier::clf_row(clf, &self.aug, &self.layout, k, z, label)?);
        }
        for (label, spec) in &self.barriers {
            head.push(barrier::hocbf_row(spec, &self.aug, &self.layout, z, label)?);
        }
        let mut tail = Vec::new();
        match &self.safety {
            SafetyConstraint::Adaptive(spec) => {
                tail.push(barrier::adacbf_row(spec, &self.aug, &self.layout, z)?);
                tail.extend(barrier::penalty_hocbf_rows(spec, &self.aug, &self.layout, z)?);
                tail.extend(barrier::penalty_clf_rows(spec, &self.aug, &self.layout, z)?);
                tail.extend(barrier::top_penalty_sign_row(&self.layout));
            }
            SafetyConstraint::Fixed(spec) => {
                let mut row = barrier::hocbf_row(spec, &self.aug, &self.layout, z, "safety")?;
                row.kind = RowKind::Safety;
                tail.push(row);
            }
            SafetyConstraint::None => {}
        }
        Ok((head, tail))
    }

    /// `u_j >= lo_j` and `u_j <= hi_j` rows for every finite bound.
    pub fn bound_rows(&self, query: &BoundsQuery) -> Result<Vec<ConstraintRow>> {
        let (lo, hi) = self.bounds.evaluate(query)?;
        let d = self.layout.dim();
        let mut rows = Vec::new();
        for j in 0..self.layout.inputs() {
            let idx = self.layout.u(j);
            for (bound, sense, name) in [(hi[j], Sense::LessEq, "max"), (lo[j], Sense::GreaterEq, "min")] {
                if bound.is_finite() {
                    let mut coeffs = vec![0.0; d];
                    coeffs[idx] = 1.0;
                    rows.push(ConstraintRow {
                        coeffs,
                        constant: -bound,
                        sense,
                        label: format!("u{}_{name}", j + 1),
                        kind: RowKind::InputBound,
                    });
                }
            }
        }
        Ok(rows)
    }

    pub fn assemble(&self, z: &[f64], query: &BoundsQuery) -> Result<StepQp> {
        let (head, tail) = self.state_rows(z)?;
        let mut rows = head;
        rows.extend(self.bound_rows(query)?);
        rows.extend(tail);
        let (h, f) = self.cost.assemble(&self.layout, z)?;
        let d = self.layout.dim();
        let mut a = Matrix::zeros(rows.len(), d);
        let mut b = Vector::zeros(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let (coeffs, rhs) = row.to_le();
            for (j, c) in coeffs.into_iter().enumerate() {
                a[(i, j)] = c;
            }
            b[i] = rhs;
        }
        let problem = QpProblem::new(h, f, a, b)?;
        Ok(StepQp { problem, rows })
    }
}
