use adacbf::acc::{sacc_problem, ScenarioConfig};
use adacbf::barrier::{ClassK, ControlCost, HocbfSpec};
use adacbf::numerics::{DualScalar, ScalarFn, VectorFn};
use adacbf::qp::QpStatus;
use adacbf::sim::{self, summarize, InfeasiblePolicy, SafetyConstraint, SafetyFilter, SimConfig, SimError};
use adacbf::system::{AffineControlSystem, InputBounds, NoiseModel};

fn integrator(drift: f64) -> AffineControlSystem {
    AffineControlSystem::new(
        VectorFn::new(1, 1, move |_| vec![DualScalar::constant(drift)]),
        VectorFn::new(1, 1, |_| vec![DualScalar::constant(1.0)]),
        1,
    )
    .unwrap()
}

/// `x' = u` with `u <= 1 - x` and `u >= 10` from step `k` on.
fn forced_infeasible(k: usize, dt: f64) -> SafetyFilter {
    let b = ScalarFn::new(1, |x| 1.0 - &x[0]);
    let spec = HocbfSpec::new(b, vec![ClassK::Linear(1.0)]).unwrap();
    let switch = k as f64 * dt - 1e-9;
    SafetyFilter::new(
        &integrator(0.0),
        SafetyConstraint::Fixed(spec),
        Vec::new(),
        Vec::new(),
        ControlCost::identity(1),
        InputBounds::new(
            1,
            move |q| vec![if q.t >= switch { 10.0 } else { -5.0 }],
            |_| vec![100.0],
        ),
    )
    .unwrap()
}

#[test]
fn fixed_seed_is_bit_identical() {
    let mut cfg = ScenarioConfig::library("noise-1x").unwrap();
    cfg.horizon = 8.0;
    let a = cfg.run(5).unwrap();
    let b = cfg.run(5).unwrap();
    assert!(a.same_values(&b));
    let c = cfg.run(6).unwrap();
    assert!(!a.same_values(&c));
}

#[test]
fn timestamps_advance_by_dt() {
    let mut cfg = ScenarioConfig::library("cd-040").unwrap();
    cfg.horizon = 2.0;
    let t = cfg.run(0).unwrap();
    assert_eq!(t.records.len(), 20);
    for (k, r) in t.records.iter().enumerate() {
        assert!((r.t - k as f64 * 0.1).abs() < 1e-12);
    }
}

#[test]
fn halving_substeps_barely_moves_terminal_state() {
    let cfg = ScenarioConfig::library("cd-040").unwrap();
    let mut fine = cfg.clone();
    fine.substeps = 2 * cfg.substeps;
    let a = cfg.run(0).unwrap();
    let b = fine.run(0).unwrap();
    let (za, zb) = (&a.records.last().unwrap().z, &b.records.last().unwrap().z);
    let diff = za.iter().zip(zb).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    assert!(diff < 1e-6, "terminal difference {diff:e}");
}

#[test]
fn penalty_stays_nonnegative_without_noise() {
    for name in ["cd-040", "cd-023", "cd-ramp-037-020", "p1star-002-cd-0155", "noise-0x"] {
        let cfg = ScenarioConfig::library(name).unwrap();
        let t = cfg.run(0).unwrap();
        for r in &t.records {
            assert!(r.z[3] >= -1e-9, "{name}: p1 = {} at t = {}", r.z[3], r.t);
        }
        let s = summarize(&t);
        assert_eq!(s.infeasible_steps, 0, "{name}");
        assert!(s.min_b.unwrap() > 0.0, "{name}");
    }
}

#[test]
fn unconstrained_zero_system_stays_put() {
    let filter = SafetyFilter::new(
        &integrator(0.0),
        SafetyConstraint::None,
        Vec::new(),
        Vec::new(),
        ControlCost::identity(1),
        InputBounds::unbounded(1),
    )
    .unwrap();
    let t = sim::run(&filter, &[3.5], &NoiseModel::zero(1), &SimConfig { horizon: 2.0, ..SimConfig::default() })
        .unwrap();
    assert_eq!(t.records.len(), 20);
    assert!(t.records.iter().all(|r| r.z == [3.5] && r.w == [0.0] && r.feasible));
}

#[test]
fn forced_infeasibility_time() {
    let dt = 0.1;
    for k in [0usize, 1, 7, 19] {
        let filter = forced_infeasible(k, dt);
        for policy in [InfeasiblePolicy::HoldLastControl, InfeasiblePolicy::ClampToBounds, InfeasiblePolicy::Halt] {
            let cfg = SimConfig {
                horizon: 2.0,
                dt,
                policy,
                ..SimConfig::default()
            };
            let t = sim::run(&filter, &[0.0], &NoiseModel::zero(1), &cfg).unwrap();
            let s = summarize(&t);
            let first = s.first_infeasible_t.unwrap();
            assert!((first - k as f64 * dt).abs() < 1e-12, "k={k}: {first}");
            assert!(t.records[..k].iter().all(|r| r.feasible));
            assert_eq!(t.records[k].status, QpStatus::Infeasible);
            match policy {
                InfeasiblePolicy::Halt => {
                    assert!(t.halted);
                    assert_eq!(t.records.len(), k + 1);
                }
                InfeasiblePolicy::ClampToBounds => {
                    assert_eq!(s.infeasible_steps, 20 - k);
                    assert!(t.records[k..].iter().all(|r| r.w[0] >= 10.0));
                }
                InfeasiblePolicy::HoldLastControl => {
                    assert_eq!(s.infeasible_steps, 20 - k);
                    let held = if k == 0 { 0.0 } else { t.records[k - 1].w[0] };
                    assert!(t.records[k..].iter().all(|r| r.w[0] == held));
                }
            }
        }
    }
}

#[test]
fn all_feasible_summary() {
    let mut cfg = ScenarioConfig::library("cd-040").unwrap();
    cfg.horizon = 1.0;
    let s = summarize(&cfg.run(0).unwrap());
    assert_eq!(s.infeasible_steps, 0);
    assert_eq!(s.first_infeasible_t, None);
    assert!(!s.halted);
    assert!(s.mean_solve_ms >= 0.0 && s.max_solve_ms >= s.mean_solve_ms);
}

#[test]
fn initial_state_outside_safe_set_is_rejected() {
    let (filter, mut z0) = sacc_problem(-5000.0, 5000.0).unwrap();
    z0[2] = 5.0;
    assert!(matches!(
        sim::run(&filter, &z0, &NoiseModel::zero(3), &SimConfig::default()),
        Err(SimError::InitialViolation { level: 0, .. })
    ));
}

#[test]
fn bad_sim_config_is_rejected() {
    let (filter, z0) = sacc_problem(-5000.0, 5000.0).unwrap();
    for cfg in [
        SimConfig { dt: 0.0, ..SimConfig::default() },
        SimConfig { horizon: 0.01, ..SimConfig::default() },
        SimConfig { substeps: 0, ..SimConfig::default() },
    ] {
        assert!(matches!(
            sim::run(&filter, &z0, &NoiseModel::zero(3), &cfg),
            Err(SimError::Config(_))
        ));
    }
}

#[test]
fn baseline_ramp_goes_infeasible() {
    let mut cfg = ScenarioConfig::library("cd-ramp-037-020").unwrap();
    cfg.mode = adacbf::acc::Mode::HocbfBaseline;
    let s = summarize(&cfg.run(0).unwrap());
    assert!(s.infeasible_steps > 0);
    assert!(s.activated_at.is_some());
    assert!(s.first_infeasible_t.unwrap() > s.activated_at.unwrap());
}
