use crate::numerics::{self, DualScalar, ScalarFn, Vector};
use crate::system::{AffineControlSystem, AugmentedSystem};

use super::{
    AdaCbfSpec, BarrierError, Cascade, ClassK, ClfSpec, HocbfSpec, LieTerms, PenaltySource,
    Result, TopPenalty,
};

/// Ordering of the QP decision vector:
/// `(u_1..u_q, clf slacks, (nu_c, delta_c) per chain, p_m)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DecisionLayout {
    inputs: usize,
    clf_slacks: usize,
    chains: usize,
    top_decision: bool,
}

impl DecisionLayout {
    pub fn new(inputs: usize, clf_slacks: usize, chains: usize, top_decision: bool) -> Self {
        Self {
            inputs,
            clf_slacks,
            chains,
            top_decision,
        }
    }

    pub fn dim(&self) -> usize {
        self.inputs + self.clf_slacks + 2 * self.chains + usize::from(self.top_decision)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn clf_slacks(&self) -> usize {
        self.clf_slacks
    }

    pub fn chains(&self) -> usize {
        self.chains
    }

    pub fn u(&self, j: usize) -> usize {
        j
    }

    pub fn clf_slack(&self, k: usize) -> usize {
        self.inputs + k
    }

    pub fn nu(&self, c: usize) -> usize {
        self.inputs + self.clf_slacks + 2 * c
    }

    pub fn penalty_slack(&self, c: usize) -> usize {
        self.nu(c) + 1
    }

    pub fn top(&self) -> Option<usize> {
        self.top_decision
            .then(|| self.inputs + self.clf_slacks + 2 * self.chains)
    }

    /// Decision index of column `j` of the augmented input `w = (u, nu)`.
    pub fn input_var(&self, j: usize) -> usize {
        if j < self.inputs {
            self.u(j)
        } else {
            self.nu(j - self.inputs)
        }
    }

    /// Augmented input `(u, nu)` extracted from a decision vector.
    pub fn augmented_input(&self, w: &[f64]) -> Vec<f64> {
        (0..self.inputs + self.chains)
            .map(|j| w[self.input_var(j)])
            .collect()
    }

    pub fn names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.inputs).map(|j| format!("u{}", j + 1)).collect();
        names.extend((0..self.clf_slacks).map(|k| format!("delta_clf{}", k + 1)));
        for c in 0..self.chains {
            names.push(format!("nu{}", c + 1));
            names.push(format!("delta{}", c + 1));
        }
        if self.top_decision {
            names.push("p_top".into());
        }
        names
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    /// `coeffs . w + constant >= 0`
    GreaterEq,
    /// `coeffs . w + constant <= 0`
    LessEq,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RowKind {
    /// The safety barrier (HOCBF or AdaCBF top condition).
    Safety,
    Barrier,
    Clf,
    PenaltyBarrier,
    PenaltyClf,
    PenaltySign,
    InputBound,
}

/// One linear constraint over the decision vector.
#[derive(Clone, Debug, PartialEq)]
pub struct ConstraintRow {
    pub coeffs: Vec<f64>,
    pub constant: f64,
    pub sense: Sense,
    pub label: String,
    pub kind: RowKind,
}

impl ConstraintRow {
    pub fn lhs(&self, w: &[f64]) -> f64 {
        self.coeffs.iter().zip(w).map(|(a, x)| a * x).sum::<f64>() + self.constant
    }

    pub fn is_satisfied(&self, w: &[f64], tol: f64) -> bool {
        match self.sense {
            Sense::GreaterEq => self.lhs(w) >= -tol,
            Sense::LessEq => self.lhs(w) <= tol,
        }
    }

    /// `(a, b)` with the row written as `a . w <= b`.
    pub fn to_le(&self) -> (Vec<f64>, f64) {
        match self.sense {
            Sense::GreaterEq => (self.coeffs.iter().map(|c| -c).collect(), self.constant),
            Sense::LessEq => (self.coeffs.clone(), -self.constant),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.constant.is_finite() && self.coeffs.iter().all(|c| c.is_finite())
    }

    fn checked(self) -> Result<Self> {
        if self.is_finite() {
            Ok(self)
        } else {
            Err(numerics::NumericsError::NonFinite("constraint row").into())
        }
    }
}

fn spread_inputs(layout: &DecisionLayout, lie: &LieTerms) -> Vec<f64> {
    let mut coeffs = vec![0.0; layout.dim()];
    for (j, &c) in lie.along_inputs.iter().enumerate() {
        coeffs[layout.input_var(j)] += c;
    }
    coeffs
}

fn check_input_dims(sys: &AugmentedSystem, layout: &DecisionLayout) -> Result<()> {
    numerics::check_dim("layout inputs", sys.base_input_dim(), layout.inputs())?;
    if layout.chains() < sys.chains().len() {
        return Err(BarrierError::Spec(format!(
            "layout has {} chains, system has {}",
            layout.chains(),
            sys.chains().len()
        )));
    }
    Ok(())
}

fn require_input_dependence(
    label: &str,
    m: usize,
    lie: &LieTerms,
    inputs: usize,
) -> Result<()> {
    let scale = 1.0 + lie.psi_top.abs() + lie.along_drift.abs();
    if lie.along_inputs[..inputs]
        .iter()
        .all(|c| c.abs() <= 1e-14 * scale)
    {
        return Err(BarrierError::RelativeDegree {
            label: label.to_string(),
            detail: format!("input does not appear after {m} differentiations"),
        });
    }
    Ok(())
}

/// HOCBF condition `L_F psi_{m-1} + L_G psi_{m-1} w + p_m alpha_m(psi_{m-1}) >= 0`.
pub fn hocbf_row(
    spec: &HocbfSpec,
    sys: &AugmentedSystem,
    layout: &DecisionLayout,
    z: &[f64],
    label: &str,
) -> Result<ConstraintRow> {
    check_input_dims(sys, layout)?;
    let cascade = spec.cascade(sys.combined())?;
    let lie = cascade.lie_terms(z)?;
    require_input_dependence(label, spec.relative_degree(), &lie, layout.inputs())?;
    ConstraintRow {
        coeffs: spread_inputs(layout, &lie),
        constant: lie.along_drift + spec.top_penalty() * cascade.top_alpha(lie.psi_top),
        sense: Sense::GreaterEq,
        label: label.to_string(),
        kind: RowKind::Barrier,
    }
    .checked()
}

/// AdaCBF condition, linear in `(u, nu, p_m)`.
pub fn adacbf_row(
    spec: &AdaCbfSpec,
    aug: &AugmentedSystem,
    layout: &DecisionLayout,
    z: &[f64],
) -> Result<ConstraintRow> {
    check_input_dims(aug, layout)?;
    let cascade = spec.cascade(aug)?;
    for (c, (i, _)) in spec.adaptive_levels().into_iter().enumerate() {
        let p = aug.output(z, c);
        if p < -1e-6 {
            return Err(BarrierError::NegativePenalty { level: i, value: p });
        }
    }
    let lie = cascade.lie_terms(z)?;
    require_input_dependence("adacbf", spec.relative_degree(), &lie, layout.inputs())?;
    let mut coeffs = spread_inputs(layout, &lie);
    let alpha_top = cascade.top_alpha(lie.psi_top);
    let mut constant = lie.along_drift;
    match (spec.top.clone(), layout.top()) {
        (TopPenalty::Decision { .. }, Some(idx)) => coeffs[idx] += alpha_top,
        (TopPenalty::Decision { initial, .. }, None) => constant += initial * alpha_top,
        (TopPenalty::Fixed(p), _) => constant += p * alpha_top,
    }
    ConstraintRow {
        coeffs,
        constant,
        sense: Sense::GreaterEq,
        label: "adacbf".into(),
        kind: RowKind::Safety,
    }
    .checked()
}

fn chain_head(aug: &AugmentedSystem, c: usize) -> ScalarFn {
    let idx = aug.chain_offset(c);
    ScalarFn::new(aug.state_dim(), move |z| z[idx].clone())
}

/// One HOCBF row per adaptive level keeping `p_i >= 0` on its chain.
pub fn penalty_hocbf_rows(
    spec: &AdaCbfSpec,
    aug: &AugmentedSystem,
    layout: &DecisionLayout,
    z: &[f64],
) -> Result<Vec<ConstraintRow>> {
    check_input_dims(aug, layout)?;
    spec.check_chains(aug)?;
    spec.adaptive_levels()
        .into_iter()
        .enumerate()
        .map(|(c, (i, pen))| {
            let len = pen.aux_alphas.len();
            let cascade = Cascade::new(
                chain_head(aug, c),
                aug.combined().clone(),
                pen.aux_alphas.clone(),
                vec![PenaltySource::Const(1.0); len - 1],
                spec.max_depth,
            )?;
            let lie = cascade.lie_terms(z)?;
            ConstraintRow {
                coeffs: spread_inputs(layout, &lie),
                constant: lie.along_drift + cascade.top_alpha(lie.psi_top),
                sense: Sense::GreaterEq,
                label: format!("penalty_hocbf_p{i}"),
                kind: RowKind::PenaltyBarrier,
            }
            .checked()
        })
        .collect()
}

/// Lyapunov function driving chain `c` (of length `len`) to `p_i = target`.
///
/// `len == 1`: `V = (p - p*)^2`. Otherwise `V = (p_len - p_hat)^2` with the
/// desired feedback `p_hat = -k_1 (p - p*) - k_2 p_2 - ... - k_{len-1} p_{len-1}`.
fn penalty_lyapunov(
    aug: &AugmentedSystem,
    c: usize,
    len: usize,
    target: f64,
    gains: &[f64],
) -> ScalarFn {
    let off = aug.chain_offset(c);
    let gains = gains.to_vec();
    ScalarFn::new(aug.state_dim(), move |z| {
        if len == 1 {
            let e = &z[off] - target;
            return &e * &e;
        }
        let mut desired = (&z[off] - target) * (-gains[0]);
        for (k, &gain) in gains.iter().enumerate().skip(1) {
            desired -= &z[off + k] * gain;
        }
        let e = &z[off + len - 1] - desired;
        &e * &e
    })
}

fn lyapunov_row(
    v: &ScalarFn,
    rate: f64,
    sys: &AffineControlSystem,
    layout: &DecisionLayout,
    z: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let vz = pad(v, z);
    let value = v.eval_real(&z[..v.arity()])?;
    let drift = sys.drift(z)?;
    let lf = numerics::directional_derivative(&vz, z, drift.as_slice())?;
    let mut coeffs = vec![0.0; layout.dim()];
    for j in 0..sys.input_dim() {
        let col = sys.input_column(z, j)?;
        coeffs[layout.input_var(j)] += numerics::directional_derivative(&vz, z, col.as_slice())?;
    }
    Ok((coeffs, lf + rate * value))
}

/// Extends a function of a state prefix to the whole augmented state.
fn pad(v: &ScalarFn, z: &[f64]) -> ScalarFn {
    if v.arity() == z.len() {
        return v.clone();
    }
    let inner = v.clone();
    let k = inner.arity();
    ScalarFn::new(z.len(), move |zz: &[DualScalar]| inner.eval(&zz[..k]))
}

/// Relaxed CLF rows `L_F V_i + L_G V_i nu_i + eps V_i - delta_i <= 0`.
pub fn penalty_clf_rows(
    spec: &AdaCbfSpec,
    aug: &AugmentedSystem,
    layout: &DecisionLayout,
    z: &[f64],
) -> Result<Vec<ConstraintRow>> {
    check_input_dims(aug, layout)?;
    spec.check_chains(aug)?;
    spec.adaptive_levels()
        .into_iter()
        .enumerate()
        .map(|(c, (i, pen))| {
            let v = penalty_lyapunov(aug, c, pen.aux_alphas.len(), pen.target, &pen.gains);
            let (mut coeffs, constant) =
                lyapunov_row(&v, pen.clf_rate, aug.combined(), layout, z)?;
            coeffs[layout.penalty_slack(c)] = -1.0;
            ConstraintRow {
                coeffs,
                constant,
                sense: Sense::LessEq,
                label: format!("penalty_clf_p{i}"),
                kind: RowKind::PenaltyClf,
            }
            .checked()
        })
        .collect()
}

/// Relaxed plant CLF `L_f V + L_g V u + eps V - delta <= 0` using slack `slack`.
pub fn clf_row(
    spec: &ClfSpec,
    sys: &AugmentedSystem,
    layout: &DecisionLayout,
    slack: usize,
    z: &[f64],
    label: &str,
) -> Result<ConstraintRow> {
    check_input_dims(sys, layout)?;
    if slack >= layout.clf_slacks() {
        return Err(BarrierError::Spec(format!("CLF slack {slack} not in layout")));
    }
    let (mut coeffs, constant) = lyapunov_row(&spec.v, spec.rate, sys.combined(), layout, z)?;
    coeffs[layout.clf_slack(slack)] = -1.0;
    ConstraintRow {
        coeffs,
        constant,
        sense: Sense::LessEq,
        label: label.to_string(),
        kind: RowKind::Clf,
    }
    .checked()
}

/// `p_m >= 0` when `p_m` is a decision variable.
pub fn top_penalty_sign_row(layout: &DecisionLayout) -> Option<ConstraintRow> {
    layout.top().map(|idx| {
        let mut coeffs = vec![0.0; layout.dim()];
        coeffs[idx] = 1.0;
        ConstraintRow {
            coeffs,
            constant: 0.0,
            sense: Sense::GreaterEq,
            label: "p_top_nonneg".into(),
            kind: RowKind::PenaltySign,
        }
    })
}

/// Checks at `z0` that `L_g L_f^k b` vanishes for `k < m - 1` and not at
/// `k = m - 1`.
pub fn validate_relative_degree(
    barrier: &ScalarFn,
    m: usize,
    sys: &AffineControlSystem,
    z0: &[f64],
) -> Result<()> {
    let label = "barrier";
    for k in 0..m {
        let cascade = Cascade::new(
            barrier.clone(),
            sys.clone(),
            vec![ClassK::Linear(1.0); k + 1],
            vec![PenaltySource::Const(0.0); k],
            k.max(crate::numerics::DEFAULT_MAX_DEPTH),
        )?;
        let lie = cascade.lie_terms(z0)?;
        let scale = 1.0 + lie.psi_top.abs() + lie.along_drift.abs();
        let max_in = lie
            .along_inputs
            .iter()
            .fold(0.0_f64, |acc, c| acc.max(c.abs()));
        let vanishes = max_in <= 1e-12 * scale;
        if k + 1 < m && !vanishes {
            return Err(BarrierError::RelativeDegree {
                label: label.into(),
                detail: format!("input appears after {} differentiations, expected {m}", k + 1),
            });
        }
        if k + 1 == m && vanishes {
            return Err(BarrierError::RelativeDegree {
                label: label.into(),
                detail: format!("input does not appear after {m} differentiations"),
            });
        }
    }
    Ok(())
}

/// Builds a decision vector with the plant input fixed to `u` that satisfies
/// the safety row and every penalty-barrier row, using only `nu` (and
/// `p_m = 0`). Returns `None` if no `nu` coefficient of the safety row is
/// positive.
pub fn satisfy_in_penalties(
    safety: &ConstraintRow,
    penalty_rows: &[ConstraintRow],
    layout: &DecisionLayout,
    u: &[f64],
) -> Option<Vector> {
    let mut w = vec![0.0; layout.dim()];
    w[..u.len()].copy_from_slice(u);
    for c in 0..layout.chains() {
        let idx = layout.nu(c);
        for row in penalty_rows.iter().filter(|r| r.coeffs[idx] != 0.0) {
            // coefficient > 0 on nu and >= sense: nu >= -(rest) / coeff
            let a = row.coeffs[idx];
            if a <= 0.0 || row.sense != Sense::GreaterEq {
                return None;
            }
            let rest = row.lhs(&w) - a * w[idx];
            w[idx] = w[idx].max(-rest / a);
        }
    }
    let deficit = safety.lhs(&w);
    if deficit < 0.0 {
        let c = (0..layout.chains()).find(|&c| safety.coeffs[layout.nu(c)] > 0.0)?;
        let idx = layout.nu(c);
        w[idx] += -deficit / safety.coeffs[idx] * (1.0 + 1e-12) + f64::EPSILON;
    }
    Some(Vector::from_vec(w))
}
