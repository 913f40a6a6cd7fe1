use serde::{Deserialize, Serialize};

use crate::qp::QpStatus;

/// State and decisions at `t`; `w` is held over `[t, t + dt)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    /// Augmented state `(x, penalty chains)`.
    pub z: Vec<f64>,
    /// Applied decision vector.
    pub w: Vec<f64>,
    /// Safety cascade `psi_0 .. psi_{m-1}`.
    pub psi: Vec<f64>,
    /// `p_1 .. p_m`.
    pub penalties: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub feasible: bool,
    pub status: QpStatus,
    /// Wall-clock solve time; excluded from equality comparisons.
    #[serde(default)]
    pub solve_ms: f64,
    /// The safety row has a positive multiplier at the optimum.
    pub safety_active: bool,
}

impl StepRecord {
    /// Equality ignoring timing.
    pub fn same_values(&self, other: &StepRecord) -> bool {
        let mut a = self.clone();
        a.solve_ms = other.solve_ms;
        &a == other
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub decision_names: Vec<String>,
    pub records: Vec<StepRecord>,
    /// First time the safety row was active.
    pub activated_at: Option<f64>,
    /// Stopped early by the halt policy.
    pub halted: bool,
}

impl Trajectory {
    pub fn same_values(&self, other: &Trajectory) -> bool {
        self.dt == other.dt
            && self.decision_names == other.decision_names
            && self.activated_at == other.activated_at
            && self.halted == other.halted
            && self.records.len() == other.records.len()
            && self
                .records
                .iter()
                .zip(&other.records)
                .all(|(a, b)| a.same_values(b))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub steps: usize,
    pub min_b: Option<f64>,
    pub argmin_b_t: Option<f64>,
    pub min_psi1: Option<f64>,
    pub argmin_psi1_t: Option<f64>,
    pub min_p1: Option<f64>,
    pub infeasible_steps: usize,
    pub first_infeasible_t: Option<f64>,
    pub activated_at: Option<f64>,
    pub halted: bool,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
}

fn min_with_time(records: &[StepRecord], f: impl Fn(&StepRecord) -> Option<f64>) -> Option<(f64, f64)> {
    records
        .iter()
        .filter_map(|r| f(r).map(|v| (v, r.t)))
        .fold(None, |best, (v, t)| match best {
            Some((bv, _)) if bv <= v => best,
            _ => Some((v, t)),
        })
}

pub fn summarize(traj: &Trajectory) -> Summary {
    let recs = &traj.records;
    let b = min_with_time(recs, |r| r.psi.first().copied());
    let psi1 = min_with_time(recs, |r| r.psi.get(1).copied());
    let p1 = min_with_time(recs, |r| {
        if r.penalties.len() > 1 {
            r.penalties.first().copied()
        } else {
            None
        }
    });
    let infeasible: Vec<&StepRecord> = recs.iter().filter(|r| !r.feasible).collect();
    let n = recs.len().max(1) as f64;
    Summary {
        steps: recs.len(),
        min_b: b.map(|x| x.0),
        argmin_b_t: b.map(|x| x.1),
        min_psi1: psi1.map(|x| x.0),
        argmin_psi1_t: psi1.map(|x| x.1),
        min_p1: p1.map(|x| x.0),
        infeasible_steps: infeasible.len(),
        first_infeasible_t: infeasible.first().map(|r| r.t),
        activated_at: traj.activated_at,
        halted: traj.halted,
        mean_solve_ms: recs.iter().map(|r| r.solve_ms).sum::<f64>() / n,
        max_solve_ms: recs.iter().map(|r| r.solve_ms).fold(0.0, f64::max),
    }
}
