//! C ABI over the `adacbf` crate.
//!
//! Objects are opaque handles created by `*_new`/`*_from_*`/`*_run` calls and
//! released with the matching `*_free`. Every fallible call returns an
//! [`AdacbfStatus`]; on failure `adacbf_last_error` describes the cause for
//! the calling thread. Matrices are dense and row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use adacbf::acc::{CdSchedule, Mode, ScenarioConfig};
use adacbf::numerics::{Matrix, Vector};
use adacbf::qp::{self, QpOptions, QpProblem, QpStatus};
use adacbf::sim::{summarize, InfeasiblePolicy, Trajectory};

/// Result codes. `ADACBF_STATUS_OK` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdacbfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Simulation = 4,
    Solver = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdacbfMode {
    Adacbf = 0,
    HocbfBaseline = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdacbfPolicy {
    Halt = 0,
    HoldLastControl = 1,
    ClampToBounds = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdacbfQpStatus {
    Optimal = 0,
    Infeasible = 1,
    MaxIterations = 2,
}

/// Per-step series readable with [`adacbf_trajectory_column`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdacbfColumn {
    Time = 0,
    Position = 1,
    Speed = 2,
    LeadPosition = 3,
    /// Barrier value `b`.
    Barrier = 4,
    /// First-order constraint value `psi_1` (NaN when absent).
    Psi1 = 5,
    /// Wheel force `u`.
    Input = 6,
    /// Penalty `p1` (NaN when absent).
    P1 = 7,
    /// Penalty `p2` (NaN when absent).
    P2 = 8,
    /// 1 for an optimal QP, 0 otherwise.
    Feasible = 9,
}

/// Trajectory summary. Optional quantities are NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct AdacbfSummary {
    pub steps: usize,
    pub min_b: f64,
    pub argmin_b_t: f64,
    pub min_psi1: f64,
    pub min_p1: f64,
    pub infeasible_steps: usize,
    pub first_infeasible_t: f64,
    pub activated_at: f64,
    pub halted: bool,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
}

/// Opaque scenario configuration.
pub struct AdacbfScenario(ScenarioConfig);

/// Opaque simulation result.
pub struct AdacbfTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(code: AdacbfStatus, msg: impl Into<String>) -> AdacbfStatus {
    set_error(msg);
    code
}

fn guard(f: impl FnOnce() -> AdacbfStatus) -> AdacbfStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(AdacbfStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, AdacbfStatus> {
    if p.is_null() {
        return Err(fail(AdacbfStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(AdacbfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn adacbf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn adacbf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates a scenario from the built-in library by name.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_from_library(
    name: *const c_char,
    out: *mut *mut AdacbfScenario,
) -> AdacbfStatus {
    guard(|| {
        if out.is_null() {
            return fail(AdacbfStatus::NullPointer, "out is null");
        }
        let name = match str_arg(name, "name") {
            Ok(s) => s,
            Err(c) => return c,
        };
        match ScenarioConfig::library(name) {
            Ok(cfg) => {
                *out = Box::into_raw(Box::new(AdacbfScenario(cfg)));
                AdacbfStatus::Ok
            }
            Err(e) => fail(AdacbfStatus::Config, e.to_string()),
        }
    })
}

/// Parses and validates a JSON scenario configuration.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_from_json(
    json: *const c_char,
    out: *mut *mut AdacbfScenario,
) -> AdacbfStatus {
    guard(|| {
        if out.is_null() {
            return fail(AdacbfStatus::NullPointer, "out is null");
        }
        let json = match str_arg(json, "json") {
            Ok(s) => s,
            Err(c) => return c,
        };
        let cfg: ScenarioConfig = match serde_json::from_str(json) {
            Ok(c) => c,
            Err(e) => return fail(AdacbfStatus::Config, e.to_string()),
        };
        if let Err(e) = cfg.validate() {
            return fail(AdacbfStatus::Config, e.to_string());
        }
        *out = Box::into_raw(Box::new(AdacbfScenario(cfg)));
        AdacbfStatus::Ok
    })
}

/// Serializes the scenario as JSON into `buf` (NUL-terminated). `needed`
/// receives the required size including the NUL, also on
/// `BufferTooSmall`. `buf` may be null when `len` is 0.
///
/// # Safety
/// `scn` must be a live handle, `buf` valid for `len` bytes, `needed` valid
/// or null.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_to_json(
    scn: *const AdacbfScenario,
    buf: *mut c_char,
    len: usize,
    needed: *mut usize,
) -> AdacbfStatus {
    guard(|| {
        let Some(scn) = scn.as_ref() else {
            return fail(AdacbfStatus::NullPointer, "scenario is null");
        };
        let json = match serde_json::to_string(&scn.0) {
            Ok(j) => j,
            Err(e) => return fail(AdacbfStatus::Config, e.to_string()),
        };
        let n = json.len() + 1;
        if !needed.is_null() {
            *needed = n;
        }
        if len < n || buf.is_null() {
            return fail(AdacbfStatus::BufferTooSmall, format!("need {n} bytes"));
        }
        ptr::copy_nonoverlapping(json.as_ptr(), buf.cast::<u8>(), json.len());
        *buf.add(json.len()) = 0;
        AdacbfStatus::Ok
    })
}

unsafe fn edit(
    scn: *mut AdacbfScenario,
    f: impl FnOnce(&mut ScenarioConfig),
) -> AdacbfStatus {
    guard(|| {
        let Some(scn) = scn.as_mut() else {
            return fail(AdacbfStatus::NullPointer, "scenario is null");
        };
        let mut next = scn.0.clone();
        f(&mut next);
        match next.validate() {
            Ok(()) => {
                scn.0 = next;
                AdacbfStatus::Ok
            }
            Err(e) => fail(AdacbfStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_mode(
    scn: *mut AdacbfScenario,
    mode: AdacbfMode,
) -> AdacbfStatus {
    edit(scn, |c| {
        c.mode = match mode {
            AdacbfMode::Adacbf => Mode::Adacbf,
            AdacbfMode::HocbfBaseline => Mode::HocbfBaseline,
        }
    })
}

/// Sets a constant braking coefficient.
///
/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_cd(scn: *mut AdacbfScenario, cd: f64) -> AdacbfStatus {
    edit(scn, |c| c.cd = CdSchedule::Constant { value: cd })
}

/// Sets a braking coefficient ramp started at safety-row activation.
///
/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_cd_ramp(
    scn: *mut AdacbfScenario,
    start: f64,
    end: f64,
    duration: f64,
) -> AdacbfStatus {
    edit(scn, |c| c.cd = CdSchedule::Ramp { start, end, duration })
}

/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_noise_scale(
    scn: *mut AdacbfScenario,
    scale: f64,
) -> AdacbfStatus {
    edit(scn, |c| c.set_noise_scale(scale))
}

/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_horizon(
    scn: *mut AdacbfScenario,
    horizon: f64,
    dt: f64,
) -> AdacbfStatus {
    edit(scn, |c| {
        c.horizon = horizon;
        c.dt = dt;
    })
}

/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_penalty_targets(
    scn: *mut AdacbfScenario,
    p1_star: f64,
    p2_star: f64,
) -> AdacbfStatus {
    edit(scn, |c| {
        c.params.p1_star = p1_star;
        c.params.p2_star = p2_star;
    })
}

/// # Safety
/// `scn` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_set_policy(
    scn: *mut AdacbfScenario,
    policy: AdacbfPolicy,
) -> AdacbfStatus {
    edit(scn, |c| {
        c.infeasible_policy = match policy {
            AdacbfPolicy::Halt => InfeasiblePolicy::Halt,
            AdacbfPolicy::HoldLastControl => InfeasiblePolicy::HoldLastControl,
            AdacbfPolicy::ClampToBounds => InfeasiblePolicy::ClampToBounds,
        }
    })
}

/// # Safety
/// `scn` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_free(scn: *mut AdacbfScenario) {
    if !scn.is_null() {
        drop(Box::from_raw(scn));
    }
}

/// Simulates the scenario with the given noise seed.
///
/// # Safety
/// `scn` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adacbf_scenario_run(
    scn: *const AdacbfScenario,
    seed: u64,
    out: *mut *mut AdacbfTrajectory,
) -> AdacbfStatus {
    guard(|| {
        let Some(scn) = scn.as_ref() else {
            return fail(AdacbfStatus::NullPointer, "scenario is null");
        };
        if out.is_null() {
            return fail(AdacbfStatus::NullPointer, "out is null");
        }
        match scn.0.run(seed) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(AdacbfTrajectory(t)));
                AdacbfStatus::Ok
            }
            Err(e) => fail(AdacbfStatus::Simulation, e.to_string()),
        }
    })
}

/// Number of recorded steps, 0 for a null handle.
///
/// # Safety
/// `traj` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn adacbf_trajectory_len(traj: *const AdacbfTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.0.records.len())
}

/// # Safety
/// `traj` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn adacbf_trajectory_summary(
    traj: *const AdacbfTrajectory,
    out: *mut AdacbfSummary,
) -> AdacbfStatus {
    guard(|| {
        let (Some(traj), false) = (traj.as_ref(), out.is_null()) else {
            return fail(AdacbfStatus::NullPointer, "null argument");
        };
        let s = summarize(&traj.0);
        let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
        *out = AdacbfSummary {
            steps: s.steps,
            min_b: nan(s.min_b),
            argmin_b_t: nan(s.argmin_b_t),
            min_psi1: nan(s.min_psi1),
            min_p1: nan(s.min_p1),
            infeasible_steps: s.infeasible_steps,
            first_infeasible_t: nan(s.first_infeasible_t),
            activated_at: nan(s.activated_at),
            halted: s.halted,
            mean_solve_ms: s.mean_solve_ms,
            max_solve_ms: s.max_solve_ms,
        };
        AdacbfStatus::Ok
    })
}

/// Copies one per-step series into `buf`, which must hold
/// [`adacbf_trajectory_len`] values.
///
/// # Safety
/// `traj` must be a live handle and `buf` valid for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn adacbf_trajectory_column(
    traj: *const AdacbfTrajectory,
    column: AdacbfColumn,
    buf: *mut f64,
    len: usize,
) -> AdacbfStatus {
    guard(|| {
        let Some(traj) = traj.as_ref() else {
            return fail(AdacbfStatus::NullPointer, "trajectory is null");
        };
        let recs = &traj.0.records;
        if len < recs.len() {
            return fail(
                AdacbfStatus::BufferTooSmall,
                format!("need {} values", recs.len()),
            );
        }
        if buf.is_null() && !recs.is_empty() {
            return fail(AdacbfStatus::NullPointer, "buf is null");
        }
        let u = traj.0.decision_names.iter().position(|n| n == "u1").unwrap_or(0);
        let top = traj.0.decision_names.iter().position(|n| n == "p_top");
        for (k, r) in recs.iter().enumerate() {
            let opt = |v: Option<&f64>| v.copied().unwrap_or(f64::NAN);
            let v = match column {
                AdacbfColumn::Time => r.t,
                AdacbfColumn::Position => r.z[0],
                AdacbfColumn::Speed => r.z[1],
                AdacbfColumn::LeadPosition => r.z[2],
                AdacbfColumn::Barrier => opt(r.psi.first()),
                AdacbfColumn::Psi1 => opt(r.psi.get(1)),
                AdacbfColumn::Input => r.w[u],
                AdacbfColumn::P1 => opt(r.penalties.first()),
                AdacbfColumn::P2 => top.map_or_else(|| opt(r.penalties.get(1)), |i| r.w[i]),
                AdacbfColumn::Feasible => f64::from(u8::from(r.feasible)),
            };
            *buf.add(k) = v;
        }
        AdacbfStatus::Ok
    })
}

/// # Safety
/// `traj` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn adacbf_trajectory_free(traj: *mut AdacbfTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Solves `min 1/2 w'Hw + f'w  s.t.  Aw <= b` with `H` (`dim x dim`) and `A`
/// (`rows x dim`) row-major. `a` and `b` may be null when `rows` is 0. On
/// `ADACBF_OK` the solver status is in `status`; `w` (length `dim`) holds the
/// minimizer when it is `Optimal` and the last iterate otherwise.
///
/// # Safety
/// All non-null pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn adacbf_qp_solve(
    dim: usize,
    rows: usize,
    h: *const f64,
    f: *const f64,
    a: *const f64,
    b: *const f64,
    w: *mut f64,
    status: *mut AdacbfQpStatus,
) -> AdacbfStatus {
    guard(|| {
        if dim == 0 {
            return fail(AdacbfStatus::InvalidArgument, "dim must be positive");
        }
        if h.is_null() || f.is_null() || w.is_null() || status.is_null() {
            return fail(AdacbfStatus::NullPointer, "null argument");
        }
        if rows > 0 && (a.is_null() || b.is_null()) {
            return fail(AdacbfStatus::NullPointer, "a or b is null");
        }
        let slice = |p: *const f64, n: usize| -> &[f64] {
            if n == 0 {
                &[]
            } else {
                std::slice::from_raw_parts(p, n)
            }
        };
        let hm = Matrix::from_row_slice(dim, dim, slice(h, dim * dim));
        let fv = Vector::from_column_slice(slice(f, dim));
        let am = Matrix::from_row_slice(rows, dim, slice(a, rows * dim));
        let bv = Vector::from_column_slice(slice(b, rows));
        let problem = match QpProblem::new(hm, fv, am, bv) {
            Ok(p) => p,
            Err(e) => return fail(AdacbfStatus::InvalidArgument, e.to_string()),
        };
        match qp::solve(&problem, &QpOptions::default()) {
            Ok(sol) => {
                ptr::copy_nonoverlapping(sol.w.as_ptr(), w, dim);
                *status = match sol.status {
                    QpStatus::Optimal => AdacbfQpStatus::Optimal,
                    QpStatus::Infeasible => AdacbfQpStatus::Infeasible,
                    QpStatus::MaxIterations => AdacbfQpStatus::MaxIterations,
                };
                AdacbfStatus::Ok
            }
            Err(e) => fail(AdacbfStatus::Solver, e.to_string()),
        }
    })
}
