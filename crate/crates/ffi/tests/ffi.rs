use std::ffi::{CStr, CString};
use std::ptr;

use adacbf_ffi::*;

fn last_error() -> String {
    let p = adacbf_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn library(name: &str) -> *mut AdacbfScenario {
    let name = CString::new(name).unwrap();
    let mut scn = ptr::null_mut();
    assert_eq!(
        unsafe { adacbf_scenario_from_library(name.as_ptr(), &mut scn) },
        AdacbfStatus::Ok
    );
    scn
}

#[test]
fn run_and_read_back() {
    let scn = library("cd-040");
    unsafe {
        assert_eq!(adacbf_scenario_set_horizon(scn, 3.0, 0.1), AdacbfStatus::Ok);
        let mut traj = ptr::null_mut();
        assert_eq!(adacbf_scenario_run(scn, 0, &mut traj), AdacbfStatus::Ok);
        let n = adacbf_trajectory_len(traj);
        assert_eq!(n, 30);

        let mut b = vec![0.0; n];
        assert_eq!(
            adacbf_trajectory_column(traj, AdacbfColumn::Barrier, b.as_mut_ptr(), n),
            AdacbfStatus::Ok
        );
        assert_eq!(b[0], 90.0);
        let mut t = vec![0.0; n];
        adacbf_trajectory_column(traj, AdacbfColumn::Time, t.as_mut_ptr(), n);
        assert!((t[n - 1] - 2.9).abs() < 1e-12);

        let mut s = AdacbfSummary::default();
        assert_eq!(adacbf_trajectory_summary(traj, &mut s), AdacbfStatus::Ok);
        assert_eq!(s.steps, n);
        assert_eq!(s.infeasible_steps, 0);
        assert!(s.first_infeasible_t.is_nan());
        assert_eq!(s.min_b, b.iter().cloned().fold(f64::INFINITY, f64::min));

        assert_eq!(
            adacbf_trajectory_column(traj, AdacbfColumn::Speed, b.as_mut_ptr(), n - 1),
            AdacbfStatus::BufferTooSmall
        );
        assert!(last_error().contains("30"));
        adacbf_trajectory_free(traj);
        adacbf_scenario_free(scn);
    }
}

#[test]
fn baseline_has_no_psi1_penalty_series() {
    let scn = library("cd-040");
    unsafe {
        adacbf_scenario_set_horizon(scn, 1.0, 0.1);
        adacbf_scenario_set_mode(scn, AdacbfMode::HocbfBaseline);
        let mut traj = ptr::null_mut();
        assert_eq!(adacbf_scenario_run(scn, 0, &mut traj), AdacbfStatus::Ok);
        let mut f = vec![0.0; 10];
        adacbf_trajectory_column(traj, AdacbfColumn::Feasible, f.as_mut_ptr(), 10);
        assert!(f.iter().all(|&v| v == 1.0));
        adacbf_trajectory_free(traj);
        adacbf_scenario_free(scn);
    }
}

#[test]
fn json_round_trip() {
    let scn = library("cd-ramp-037-020");
    unsafe {
        let mut needed = 0;
        assert_eq!(
            adacbf_scenario_to_json(scn, ptr::null_mut(), 0, &mut needed),
            AdacbfStatus::BufferTooSmall
        );
        let mut buf = vec![0 as std::ffi::c_char; needed];
        assert_eq!(
            adacbf_scenario_to_json(scn, buf.as_mut_ptr(), needed, &mut needed),
            AdacbfStatus::Ok
        );
        let mut copy = ptr::null_mut();
        assert_eq!(adacbf_scenario_from_json(buf.as_ptr(), &mut copy), AdacbfStatus::Ok);
        let mut again = vec![0 as std::ffi::c_char; needed];
        adacbf_scenario_to_json(copy, again.as_mut_ptr(), needed, ptr::null_mut());
        assert_eq!(buf, again);
        adacbf_scenario_free(copy);
        adacbf_scenario_free(scn);
    }
}

#[test]
fn errors_are_reported() {
    unsafe {
        let mut scn = ptr::null_mut();
        let bad = CString::new("nope").unwrap();
        assert_eq!(adacbf_scenario_from_library(bad.as_ptr(), &mut scn), AdacbfStatus::Config);
        assert!(last_error().contains("unknown scenario"));
        assert!(scn.is_null());

        assert_eq!(adacbf_scenario_from_library(ptr::null(), &mut scn), AdacbfStatus::NullPointer);
        let json = CString::new("{\"name\": 3}").unwrap();
        assert_eq!(adacbf_scenario_from_json(json.as_ptr(), &mut scn), AdacbfStatus::Config);

        let scn = library("cd-040");
        assert_eq!(adacbf_scenario_set_cd(scn, -1.0), AdacbfStatus::InvalidArgument);
        assert_eq!(adacbf_scenario_set_horizon(scn, 1.0, 0.0), AdacbfStatus::InvalidArgument);
        assert_eq!(adacbf_scenario_set_cd(scn, 0.3), AdacbfStatus::Ok);
        assert!(adacbf_last_error().is_null());
        adacbf_scenario_free(scn);

        let mut traj = ptr::null_mut();
        assert_eq!(adacbf_scenario_run(ptr::null(), 0, &mut traj), AdacbfStatus::NullPointer);
        assert_eq!(adacbf_trajectory_len(ptr::null()), 0);
        adacbf_scenario_free(ptr::null_mut());
        adacbf_trajectory_free(ptr::null_mut());
    }
}

#[test]
fn halt_policy_stops_early() {
    let scn = library("cd-ramp-037-020");
    unsafe {
        adacbf_scenario_set_mode(scn, AdacbfMode::HocbfBaseline);
        adacbf_scenario_set_policy(scn, AdacbfPolicy::Halt);
        let mut traj = ptr::null_mut();
        assert_eq!(adacbf_scenario_run(scn, 0, &mut traj), AdacbfStatus::Ok);
        let mut s = AdacbfSummary::default();
        adacbf_trajectory_summary(traj, &mut s);
        assert!(s.halted);
        assert_eq!(s.infeasible_steps, 1);
        assert!(s.steps < 300);
        adacbf_trajectory_free(traj);
        adacbf_scenario_free(scn);
    }
}

#[test]
fn dense_qp() {
    // min (w0-1)^2 + (w1-2)^2  s.t. w0 + w1 <= 1
    let h = [2.0, 0.0, 0.0, 2.0];
    let f = [-2.0, -4.0];
    let a = [1.0, 1.0];
    let b = [1.0];
    let mut w = [0.0; 2];
    let mut st = AdacbfQpStatus::MaxIterations;
    unsafe {
        assert_eq!(
            adacbf_qp_solve(2, 1, h.as_ptr(), f.as_ptr(), a.as_ptr(), b.as_ptr(), w.as_mut_ptr(), &mut st),
            AdacbfStatus::Ok
        );
        assert_eq!(st, AdacbfQpStatus::Optimal);
        assert!((w[0] - 0.0).abs() < 1e-9 && (w[1] - 1.0).abs() < 1e-9);

        assert_eq!(
            adacbf_qp_solve(2, 0, h.as_ptr(), f.as_ptr(), ptr::null(), ptr::null(), w.as_mut_ptr(), &mut st),
            AdacbfStatus::Ok
        );
        assert!((w[0] - 1.0).abs() < 1e-9 && (w[1] - 2.0).abs() < 1e-9);

        // w0 <= -1 and -w0 <= -1
        let a = [1.0, 0.0, -1.0, 0.0];
        let b = [-1.0, -1.0];
        adacbf_qp_solve(2, 2, h.as_ptr(), f.as_ptr(), a.as_ptr(), b.as_ptr(), w.as_mut_ptr(), &mut st);
        assert_eq!(st, AdacbfQpStatus::Infeasible);

        let bad_h = [1.0, 0.0, 0.0, -1.0];
        assert_eq!(
            adacbf_qp_solve(2, 0, bad_h.as_ptr(), f.as_ptr(), ptr::null(), ptr::null(), w.as_mut_ptr(), &mut st),
            AdacbfStatus::InvalidArgument
        );
        assert!(last_error().contains("positive semidefinite"));
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(adacbf_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/adacbf.h");
    let text = std::fs::read_to_string(header).unwrap();
    for sym in ["adacbf_scenario_run", "adacbf_qp_solve", "adacbf_last_error", "ADACBF_STATUS_OK"] {
        assert!(text.contains(sym), "{sym}");
    }
    let Ok(status) = std::process::Command::new("cc")
        .args(["-fsyntax-only", "-x", "c", "-std=c99", "-Wall", "-Werror", header])
        .status()
    else {
        return;
    };
    assert!(status.success());
}
