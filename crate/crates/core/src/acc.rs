//! Adaptive cruise control benchmark: ego vehicle with quadratic rolling
//! resistance following a lead vehicle at constant speed.
//!
//! State `x = (x, v, x_p)`, input `u` (wheel force). Safety barrier
//! `b = x_p - x - delta_0` with `psi_1 = b' + p_1 b|b|` and
//! `psi_2 = psi_1' + p_2 psi_1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::barrier::{
    AdaCbfSpec, AdaptivePenalty, ClassK, ClfSpec, ConstraintRow, ControlCost, DecisionLayout,
    HocbfSpec, LevelPenalty, RowKind, Sense, TopPenalty,
};
use crate::numerics::{DualScalar, Matrix, ScalarFn, Vector, VectorFn};
use crate::sim::{self, InfeasiblePolicy, SafetyConstraint, SafetyFilter, SimConfig, SimError, Trajectory};
use crate::system::{AffineControlSystem, BoundsQuery, InputBounds, NoiseModel};

/// Speed and acceleration noise half-widths at scale 1.
pub const BASE_NOISE: [f64; 2] = [2.0, 0.45];

/// Physical parameters, targets and cost weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AccParams {
    pub mass: f64,
    pub gravity: f64,
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// Lead vehicle speed `v_0`.
    pub lead_speed: f64,
    /// Desired speed `v_d`.
    pub desired_speed: f64,
    /// Minimum gap `delta_0`.
    pub standstill_gap: f64,
    pub v_max: f64,
    pub v_min: f64,
    pub v_init: f64,
    /// `x_p(0) - x(0)`.
    pub gap_init: f64,
    /// CLF rate shared by the speed CLF and the penalty CLF.
    pub eps: f64,
    /// Upper bound coefficient: `u <= c_a M g`.
    pub ca: f64,
    pub p_acc: f64,
    pub w1: f64,
    /// Weight `P_1` on `delta_1^2`. Defaults to 1e12; with much smaller
    /// values `nu_1` is cheap enough that the filter raises `p_1` instead of
    /// braking and runs out of braking distance.
    pub p1_weight: f64,
    /// Weight `Q` on `(p_2 - p_2*)^2`.
    pub q: f64,
    pub p1_init: f64,
    pub p1_star: f64,
    pub p2_star: f64,
    /// Pins `p_2` to a constant instead of a decision variable.
    pub p2_fixed: Option<f64>,
}

impl Default for AccParams {
    fn default() -> Self {
        Self {
            mass: 1650.0,
            gravity: 9.81,
            f0: 0.1,
            f1: 5.0,
            f2: 0.25,
            lead_speed: 13.89,
            desired_speed: 24.0,
            standstill_gap: 10.0,
            v_max: 30.0,
            v_min: 0.0,
            v_init: 20.0,
            gap_init: 100.0,
            eps: 10.0,
            ca: 0.4,
            p_acc: 1.0,
            w1: 2.0,
            p1_weight: 1e12,
            q: 1e12,
            p1_init: 0.1,
            p1_star: 0.1,
            p2_star: 1.0,
            p2_fixed: None,
        }
    }
}

impl AccParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let positive = [
            ("mass", self.mass),
            ("gravity", self.gravity),
            ("f0", self.f0),
            ("f1", self.f1),
            ("f2", self.f2),
            ("standstill_gap", self.standstill_gap),
            ("eps", self.eps),
            ("ca", self.ca),
            ("p_acc", self.p_acc),
            ("w1", self.w1),
            ("p1_weight", self.p1_weight),
            ("p1_init", self.p1_init),
            ("p1_star", self.p1_star),
            ("p2_star", self.p2_star),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(SimError::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.q.is_finite() && self.q >= 0.0) {
            return Err(SimError::Config(format!("q must be >= 0, got {}", self.q)));
        }
        if !(self.v_min < self.v_max) {
            return Err(SimError::Config("v_min must be below v_max".into()));
        }
        for (name, v) in [
            ("lead_speed", self.lead_speed),
            ("desired_speed", self.desired_speed),
            ("v_init", self.v_init),
            ("gap_init", self.gap_init),
        ] {
            if !v.is_finite() {
                return Err(SimError::Config(format!("{name} must be finite")));
            }
        }
        if let Some(p) = self.p2_fixed {
            if !(p.is_finite() && p > 0.0) {
                return Err(SimError::Config("p2_fixed must be positive".into()));
            }
        }
        Ok(())
    }

    /// `F_r(v) = f0 sgn(v) + f1 v + f2 v^2`, `sgn(0) = 0`.
    pub fn resistance(&self, v: f64) -> f64 {
        let sgn = if v > 0.0 {
            1.0
        } else if v < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.f0 * sgn + self.f1 * v + self.f2 * v * v
    }

    fn resistance_dual(&self, v: &DualScalar) -> DualScalar {
        v.signum() * self.f0 + v * self.f1 + v * v * self.f2
    }

    /// Initial plant state `(x, v, x_p)`.
    pub fn initial_state(&self) -> Vec<f64> {
        vec![0.0, self.v_init, self.gap_init]
    }

    pub fn system(&self) -> AffineControlSystem {
        let p = self.clone();
        let drift = VectorFn::new(3, 3, move |x| {
            vec![
                x[1].clone(),
                -p.resistance_dual(&x[1]) / p.mass,
                DualScalar::constant(p.lead_speed),
            ]
        });
        let inv_m = 1.0 / self.mass;
        let g = VectorFn::new(3, 3, move |_| {
            vec![
                DualScalar::constant(0.0),
                DualScalar::constant(inv_m),
                DualScalar::constant(0.0),
            ]
        });
        AffineControlSystem::new(drift, g, 1).expect("ACC dimensions are consistent")
    }

    /// `b(x) = x_p - x - delta_0`.
    pub fn barrier(&self) -> ScalarFn {
        let d0 = self.standstill_gap;
        ScalarFn::new(3, move |x| &x[2] - &x[0] - d0)
    }

    pub fn alphas(&self) -> Vec<ClassK> {
        vec![ClassK::Quadratic(1.0), ClassK::Linear(1.0)]
    }

    pub fn adacbf_spec(&self) -> AdaCbfSpec {
        let mut pen = AdaptivePenalty::with_defaults(1, self.p1_init, self.p1_star);
        pen.clf_rate = self.eps;
        pen.nu_weight = self.w1;
        pen.slack_weight = self.p1_weight;
        let top = match self.p2_fixed {
            Some(p) => TopPenalty::Fixed(p),
            None => TopPenalty::Decision {
                target: self.p2_star,
                weight: self.q,
                initial: self.p2_star,
            },
        };
        AdaCbfSpec::new(
            self.barrier(),
            self.alphas(),
            vec![LevelPenalty::Adaptive(pen)],
            top,
        )
        .expect("validated parameters give a valid spec")
    }

    /// Frozen-penalty HOCBF with `p_1 = p1_init`, `p_2 = p2_fixed or p2_star`.
    pub fn baseline_spec(&self) -> HocbfSpec {
        self.adacbf_spec().frozen()
    }

    pub fn speed_clf(&self) -> ClfSpec {
        let vd = self.desired_speed;
        let v = ScalarFn::new(2, move |x| {
            let e = &x[1] - vd;
            &e * &e
        });
        ClfSpec::new(v, self.eps, self.p_acc).expect("validated parameters give a valid CLF")
    }

    pub fn speed_limits(&self) -> Vec<(String, HocbfSpec)> {
        let (vmax, vmin) = (self.v_max, self.v_min);
        let upper = ScalarFn::new(2, move |x| vmax - &x[1]);
        let lower = ScalarFn::new(2, move |x| &x[1] - vmin);
        vec![
            (
                "v_max".into(),
                HocbfSpec::new(upper, vec![ClassK::Linear(1.0)]).expect("valid"),
            ),
            (
                "v_min".into(),
                HocbfSpec::new(lower, vec![ClassK::Linear(1.0)]).expect("valid"),
            ),
        ]
    }

    /// `1/2 H_u u^2 + F_u u` from `(u - F_r(v))^2 / M^2`.
    pub fn control_cost(&self) -> ControlCost {
        let p = self.clone();
        ControlCost::new(1, move |z| {
            let m2 = p.mass * p.mass;
            (
                Matrix::from_element(1, 1, 2.0 / m2),
                Vector::from_element(1, -2.0 * p.resistance(z[1]) / m2),
            )
        })
    }
}

/// Braking coefficient schedule for `u >= -c_d(t) M g`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CdSchedule {
    Constant { value: f64 },
    /// `start` until the safety row first activates, then linear to `end`
    /// over `duration` seconds.
    Ramp { start: f64, end: f64, duration: f64 },
}

impl CdSchedule {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = |v: f64| v.is_finite() && v > 0.0 && v <= 1.0;
        match *self {
            CdSchedule::Constant { value } if !ok(value) => {
                Err(SimError::Config(format!("c_d = {value} must be in (0, 1]")))
            }
            CdSchedule::Ramp { start, end, .. } if !ok(start) || !ok(end) => Err(
                SimError::Config(format!("c_d ramp {start}:{end} must stay in (0, 1]")),
            ),
            CdSchedule::Ramp { duration, .. } if !(duration.is_finite() && duration >= 0.0) => {
                Err(SimError::Config("c_d ramp duration must be >= 0".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn value(&self, query: &BoundsQuery) -> f64 {
        match *self {
            CdSchedule::Constant { value } => value,
            CdSchedule::Ramp {
                start,
                end,
                duration,
            } => match query.activated_at {
                None => start,
                Some(ta) => {
                    let s = if duration > 0.0 {
                        ((query.t - ta) / duration).clamp(0.0, 1.0)
                    } else {
                        1.0
                    };
                    start + (end - start) * s
                }
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[default]
    Adacbf,
    HocbfBaseline,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Adacbf => "adacbf",
            Mode::HocbfBaseline => "hocbf-baseline",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "adacbf" => Ok(Mode::Adacbf),
            "hocbf-baseline" => Ok(Mode::HocbfBaseline),
            other => Err(format!("unknown mode '{other}' (adacbf, hocbf-baseline)")),
        }
    }
}

pub fn input_bounds(params: &AccParams, cd: &CdSchedule) -> InputBounds {
    let mg = params.mass * params.gravity;
    let upper = params.ca * mg;
    let cd = cd.clone();
    InputBounds::new(1, move |q| vec![-cd.value(q) * mg], move |_| vec![upper])
}

/// Safety filter and initial augmented state for one mode.
pub fn build_acc_problem(
    params: &AccParams,
    cd: &CdSchedule,
    mode: Mode,
) -> Result<(SafetyFilter, Vec<f64>), SimError> {
    params.validate()?;
    cd.validate()?;
    let safety = match mode {
        Mode::Adacbf => SafetyConstraint::Adaptive(params.adacbf_spec()),
        Mode::HocbfBaseline => SafetyConstraint::Fixed(params.baseline_spec()),
    };
    let filter = SafetyFilter::new(
        &params.system(),
        safety,
        vec![("speed_clf".into(), params.speed_clf())],
        params.speed_limits(),
        params.control_cost(),
        input_bounds(params, cd),
    )?;
    let z0 = filter.initial_state(&params.initial_state());
    Ok((filter, z0))
}

/// A named, fully resolved ACC run description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub mode: Mode,
    pub cd: CdSchedule,
    /// Half-widths of the speed and acceleration noise.
    #[serde(default)]
    pub noise: [f64; 2],
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
    #[serde(default)]
    pub infeasible_policy: InfeasiblePolicy,
    #[serde(default)]
    pub params: AccParams,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_horizon() -> f64 {
    30.0
}

fn default_dt() -> f64 {
    0.1
}

fn default_substeps() -> usize {
    10
}

/// Duration of the `cd-ramp-037-020` decrease after activation.
pub const DEFAULT_RAMP_DURATION: f64 = 2.0;

pub const SCENARIOS: &[&str] = &[
    "cd-040",
    "cd-023",
    "cd-ramp-037-020",
    "p1star-002-cd-0155",
    "p2-frozen",
    "noise-0x",
    "noise-1x",
    "noise-2x",
];

impl ScenarioConfig {
    /// Constant `c_d`, noise-free, adaptive mode, default parameters.
    pub fn base(name: &str, cd: f64) -> Self {
        Self {
            name: name.to_string(),
            mode: Mode::Adacbf,
            cd: CdSchedule::Constant { value: cd },
            noise: [0.0, 0.0],
            seeds: default_seeds(),
            horizon: default_horizon(),
            dt: default_dt(),
            substeps: default_substeps(),
            infeasible_policy: InfeasiblePolicy::default(),
            params: AccParams::default(),
        }
    }

    pub fn library(name: &str) -> Result<Self, SimError> {
        let mut cfg = match name {
            "cd-040" => Self::base(name, 0.4),
            "cd-023" => Self::base(name, 0.23),
            "cd-ramp-037-020" => {
                let mut c = Self::base(name, 0.37);
                c.cd = CdSchedule::Ramp {
                    start: 0.37,
                    end: 0.2,
                    duration: DEFAULT_RAMP_DURATION,
                };
                c
            }
            "p1star-002-cd-0155" => {
                let mut c = Self::base(name, 0.155);
                c.params.p1_init = 0.02;
                c.params.p1_star = 0.02;
                c
            }
            "p2-frozen" => {
                let mut c = Self::base(name, 0.23);
                c.params.p2_fixed = Some(1.0);
                c
            }
            "noise-0x" | "noise-1x" | "noise-2x" => {
                let scale = match name {
                    "noise-0x" => 0.0,
                    "noise-1x" => 1.0,
                    _ => 2.0,
                };
                let mut c = Self::base(name, 0.23);
                c.set_noise_scale(scale);
                c
            }
            other => {
                return Err(SimError::Config(format!(
                    "unknown scenario '{other}'; known: {}",
                    SCENARIOS.join(", ")
                )))
            }
        };
        cfg.name = name.to_string();
        Ok(cfg)
    }

    pub fn set_noise_scale(&mut self, scale: f64) {
        self.noise = [BASE_NOISE[0] * scale, BASE_NOISE[1] * scale];
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.params.validate()?;
        self.cd.validate()?;
        if self.seeds.is_empty() {
            return Err(SimError::Config("at least one seed is required".into()));
        }
        if self.noise.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            return Err(SimError::Config("noise amplitudes must be >= 0".into()));
        }
        self.sim_config().validate()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            horizon: self.horizon,
            dt: self.dt,
            substeps: self.substeps,
            policy: self.infeasible_policy,
            ..SimConfig::default()
        }
    }

    pub fn noise_model(&self, seed: u64) -> Result<NoiseModel, SimError> {
        Ok(NoiseModel::new(self.noise.to_vec(), seed, self.dt)?)
    }

    pub fn run(&self, seed: u64) -> Result<Trajectory, SimError> {
        self.validate()?;
        let (filter, z0) = build_acc_problem(&self.params, &self.cd, self.mode)?;
        sim::run(&filter, &z0, &self.noise_model(seed)?, &self.sim_config())
    }
}

/// Direct transcriptions of the ACC constraint rows, used as an oracle for
/// the generic engine. `z = (x, v, x_p, p_1)`.
pub mod closed_form {
    use super::*;

    fn row(coeffs: Vec<f64>, constant: f64, sense: Sense, label: &str, kind: RowKind) -> ConstraintRow {
        ConstraintRow {
            coeffs,
            constant,
            sense,
            label: label.into(),
            kind,
        }
    }

    /// Layout `(u, delta_acc, nu_1, delta_1, p_2)`.
    pub fn layout() -> DecisionLayout {
        DecisionLayout::new(1, 1, 1, true)
    }

    pub fn speed_clf(p: &AccParams, z: &[f64]) -> ConstraintRow {
        let v = z[1];
        let e = v - p.desired_speed;
        let fr = p.resistance(v);
        row(
            vec![2.0 * e / p.mass, -1.0, 0.0, 0.0, 0.0],
            -2.0 * e * fr / p.mass + p.eps * e * e,
            Sense::LessEq,
            "speed_clf",
            RowKind::Clf,
        )
    }

    pub fn speed_max(p: &AccParams, z: &[f64]) -> ConstraintRow {
        let v = z[1];
        row(
            vec![-1.0 / p.mass, 0.0, 0.0, 0.0, 0.0],
            p.resistance(v) / p.mass + (p.v_max - v),
            Sense::GreaterEq,
            "v_max",
            RowKind::Barrier,
        )
    }

    pub fn speed_min(p: &AccParams, z: &[f64]) -> ConstraintRow {
        let v = z[1];
        row(
            vec![1.0 / p.mass, 0.0, 0.0, 0.0, 0.0],
            -p.resistance(v) / p.mass + (v - p.v_min),
            Sense::GreaterEq,
            "v_min",
            RowKind::Barrier,
        )
    }

    pub fn adacbf(p: &AccParams, z: &[f64]) -> ConstraintRow {
        let (x, v, xp, p1) = (z[0], z[1], z[2], z[3]);
        let b = xp - x - p.standstill_gap;
        let bdot = p.lead_speed - v;
        let psi1 = bdot + p1 * b * b.abs();
        row(
            vec![-1.0 / p.mass, 0.0, b * b.abs(), 0.0, psi1],
            p.resistance(v) / p.mass + 2.0 * p1 * b.abs() * bdot,
            Sense::GreaterEq,
            "adacbf",
            RowKind::Safety,
        )
    }

    pub fn penalty_hocbf(z: &[f64]) -> ConstraintRow {
        row(
            vec![0.0, 0.0, 1.0, 0.0, 0.0],
            z[3],
            Sense::GreaterEq,
            "penalty_hocbf_p1",
            RowKind::PenaltyBarrier,
        )
    }

    pub fn penalty_clf(p: &AccParams, z: &[f64]) -> ConstraintRow {
        let e = z[3] - p.p1_star;
        row(
            vec![0.0, 0.0, 2.0 * e, -1.0, 0.0],
            p.eps * e * e,
            Sense::LessEq,
            "penalty_clf_p1",
            RowKind::PenaltyClf,
        )
    }
}

/// Double-integrator car following: `x' = v`, `v' = u`, lead at constant
/// speed, `b = x_p - x - delta_0` with unit linear class-K functions and a
/// speed CLF. Returns the filter and `z(0)`.
pub fn sacc_problem(u_min: f64, u_max: f64) -> Result<(SafetyFilter, Vec<f64>), SimError> {
    let (v0, vd, d0) = (13.89, 24.0, 10.0);
    let sys = AffineControlSystem::new(
        VectorFn::new(3, 3, move |x| {
            vec![x[1].clone(), DualScalar::constant(0.0), DualScalar::constant(v0)]
        }),
        VectorFn::new(3, 3, |_| {
            vec![
                DualScalar::constant(0.0),
                DualScalar::constant(1.0),
                DualScalar::constant(0.0),
            ]
        }),
        1,
    )?;
    let b = ScalarFn::new(3, move |x| &x[2] - &x[0] - d0);
    let hocbf = HocbfSpec::new(b, vec![ClassK::Linear(1.0), ClassK::Linear(1.0)])?;
    let clf = ScalarFn::new(2, move |x| {
        let e = &x[1] - vd;
        &e * &e
    });
    let filter = SafetyFilter::new(
        &sys,
        SafetyConstraint::Fixed(hocbf),
        vec![("speed_clf".into(), ClfSpec::new(clf, 1.0, 1.0)?)],
        Vec::new(),
        ControlCost::identity(1),
        InputBounds::constant(vec![u_min], vec![u_max]),
    )?;
    Ok((filter, vec![0.0, 20.0, 100.0]))
}
