//! Closed-loop simulation: per step assemble and solve the QP, hold the
//! decision over `dt`, integrate the noisy augmented dynamics with RK4.

mod filter;
mod trajectory;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::barrier::{BarrierError, RowKind};
use crate::numerics::{NumericsError, Vector};
use crate::barrier::DecisionLayout;
use crate::qp::{self, QpError, QpOptions, QpSolution, QpStatus};
use crate::system::{AffineControlSystem, BoundsQuery, NoiseModel, SystemError};

pub use filter::{SafetyConstraint, SafetyFilter, StepQp};
pub use trajectory::{summarize, StepRecord, Summary, Trajectory};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error(transparent)]
    Barrier(#[from] BarrierError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("invalid simulation setup: {0}")]
    Config(String),
    #[error("initial state violates psi_{level} >= 0 (value {value})")]
    InitialViolation { level: usize, value: f64 },
    #[error("state became non-finite at t={0}")]
    NonFinite(f64),
}

pub type Result<T, E = SimError> = std::result::Result<T, E>;

/// What to apply when a step's QP has no optimal solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InfeasiblePolicy {
    /// Stop the run.
    Halt,
    /// Reuse the previous decision vector.
    #[default]
    HoldLastControl,
    /// Reuse the previous decision vector with inputs clipped to the current
    /// bounds.
    ClampToBounds,
}

impl InfeasiblePolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            InfeasiblePolicy::Halt => "halt",
            InfeasiblePolicy::HoldLastControl => "hold-last-control",
            InfeasiblePolicy::ClampToBounds => "clamp-to-bounds",
        }
    }
}

impl std::str::FromStr for InfeasiblePolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "halt" => Ok(Self::Halt),
            "hold-last-control" => Ok(Self::HoldLastControl),
            "clamp-to-bounds" => Ok(Self::ClampToBounds),
            other => Err(format!(
                "unknown infeasible policy '{other}' (halt, hold-last-control, clamp-to-bounds)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub horizon: f64,
    pub dt: f64,
    /// RK4 substeps per `dt`.
    pub substeps: usize,
    pub policy: InfeasiblePolicy,
    pub qp: QpOptions,
    /// Multiplier above which the safety row counts as active.
    pub active_tol: f64,
    /// Minimum share of the plant-input stationarity carried by an active
    /// safety row, see [`safety_input_share`].
    pub active_share: f64,
    /// Allowed negative slack of `psi_i(z0) >= 0`.
    pub initial_tol: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 30.0,
            dt: 0.1,
            substeps: 10,
            policy: InfeasiblePolicy::default(),
            qp: QpOptions::default(),
            active_tol: 1e-6,
            active_share: 1e-2,
            initial_tol: 1e-9,
        }
    }
}

impl SimConfig {
    /// Number of control intervals `round(horizon / dt)`.
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SimError::Config("dt must be positive".into()));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(SimError::Config("horizon must be at least dt".into()));
        }
        if self.substeps == 0 {
            return Err(SimError::Config("substeps must be >= 1".into()));
        }
        Ok(())
    }
}

/// Classical RK4 over `dt` in `substeps` equal steps with `w` and the additive
/// noise (applied to the leading state channels) held constant.
pub fn integrate_step(
    sys: &AffineControlSystem,
    z: &[f64],
    w: &[f64],
    noise: &[f64],
    dt: f64,
    substeps: usize,
) -> Result<Vector> {
    if substeps == 0 {
        return Err(SimError::Config("substeps must be >= 1".into()));
    }
    if noise.len() > z.len() {
        return Err(SimError::Config(format!(
            "{} noise channels for a {}-dimensional state",
            noise.len(),
            z.len()
        )));
    }
    let rhs = |s: &Vector| -> Result<Vector> {
        let mut d = sys.evaluate_rhs(s.as_slice(), w)?;
        for (i, n) in noise.iter().enumerate() {
            d[i] += n;
        }
        Ok(d)
    };
    let h = dt / substeps as f64;
    let mut s = Vector::from_column_slice(z);
    for _ in 0..substeps {
        let k1 = rhs(&s)?;
        let k2 = rhs(&(&s + &k1 * (h / 2.0)))?;
        let k3 = rhs(&(&s + &k2 * (h / 2.0)))?;
        let k4 = rhs(&(&s + &k3 * h))?;
        s += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    }
    if !s.iter().all(|v| v.is_finite()) {
        return Err(NumericsError::NonFinite("integrated state").into());
    }
    Ok(s)
}

/// Fraction of the plant-input stationarity `H w + f + A'lambda = 0` (input
/// components only, l1 norms) carried by the safety row. Near zero when the
/// row binds only through the penalty decisions.
pub fn safety_input_share(step: &StepQp, sol: &QpSolution, layout: &DecisionLayout) -> f64 {
    let Some(s) = step.find(RowKind::Safety) else {
        return 0.0;
    };
    let p = &step.problem;
    let grad = p.h() * &sol.w + p.f();
    let mut total = 0.0;
    let mut own = 0.0;
    for j in 0..layout.inputs() {
        let c = layout.u(j);
        total += grad[c].abs();
        for i in 0..p.rows() {
            let term = sol.multipliers[i] * p.a()[(i, c)].abs();
            total += term;
            if i == s {
                own += term;
            }
        }
    }
    if total > 0.0 {
        own / total
    } else {
        0.0
    }
}

pub fn run(
    filter: &SafetyFilter,
    z0: &[f64],
    noise: &NoiseModel,
    cfg: &SimConfig,
) -> Result<Trajectory> {
    cfg.validate()?;
    let aug = filter.system();
    let layout = *filter.layout();
    if z0.len() != aug.state_dim() {
        return Err(NumericsError::DimensionMismatch {
            context: "initial state",
            expected: aug.state_dim(),
            found: z0.len(),
        }
        .into());
    }
    for (level, &value) in filter.psi(z0)?.iter().enumerate() {
        if value < -cfg.initial_tol {
            return Err(SimError::InitialViolation { level, value });
        }
    }

    let mut z = z0.to_vec();
    let mut last_w = vec![0.0; layout.dim()];
    if let (Some(idx), Some(&p)) = (layout.top(), filter.penalties(z0, None).last()) {
        last_w[idx] = p;
    }
    let mut activated_at = None;
    let mut records = Vec::with_capacity(cfg.steps());
    let mut halted = false;

    for k in 0..cfg.steps() {
        let t = k as f64 * cfg.dt;
        let query = BoundsQuery { t, activated_at };
        let (lower, upper) = filter.bounds().evaluate(&query)?;
        let step = filter.assemble(&z, &query)?;
        let start = Instant::now();
        let sol = qp::solve(&step.problem, &cfg.qp)?;
        let solve_ms = start.elapsed().as_secs_f64() * 1e3;
        let feasible = sol.status == QpStatus::Optimal;

        let (w, safety_active) = if feasible {
            let active = step.find(RowKind::Safety).is_some_and(|i| {
                sol.multipliers[i] > cfg.active_tol
                    && safety_input_share(&step, &sol, &layout) > cfg.active_share
            });
            (sol.w.as_slice().to_vec(), active)
        } else {
            match cfg.policy {
                InfeasiblePolicy::Halt | InfeasiblePolicy::HoldLastControl => {
                    (last_w.clone(), false)
                }
                InfeasiblePolicy::ClampToBounds => {
                    let mut w = last_w.clone();
                    for j in 0..layout.inputs() {
                        let i = layout.u(j);
                        w[i] = w[i].clamp(lower[j], upper[j]);
                    }
                    (w, false)
                }
            }
        };
        if safety_active && activated_at.is_none() {
            activated_at = Some(t);
        }
        records.push(StepRecord {
            t,
            z: z.clone(),
            psi: filter.psi(&z)?,
            penalties: filter.penalties(&z, layout.top().map(|i| w[i])),
            w: w.clone(),
            lower,
            upper,
            feasible,
            status: sol.status,
            solve_ms,
            safety_active,
        });
        if !feasible && cfg.policy == InfeasiblePolicy::Halt {
            halted = true;
            break;
        }
        let noise_now = noise.sample(t)?;
        let next = integrate_step(
            aug.combined(),
            &z,
            &layout.augmented_input(&w),
            noise_now.as_slice(),
            cfg.dt,
            cfg.substeps,
        )
        .map_err(|e| match e {
            SimError::Numerics(NumericsError::NonFinite(_)) => SimError::NonFinite(t + cfg.dt),
            other => other,
        })?;
        z = next.as_slice().to_vec();
        last_w = w;
    }

    Ok(Trajectory {
        dt: cfg.dt,
        decision_names: layout.names(),
        records,
        activated_at,
        halted,
    })
}
