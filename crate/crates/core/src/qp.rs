//! Dense convex QP `min 1/2 w'Hw + F'w  s.t.  Aw <= b`.
//!
//! Phase 1 finds a feasible point as the least-distance solution of the
//! constraint system through a non-negative least-squares dual; a zero
//! residual there yields a Farkas certificate. Phase 2 is a primal active-set
//! method on a column- and row-scaled copy with `H + rho I`, followed by a
//! polish of the final active set with the unregularized Hessian.

use nalgebra::{SymmetricEigen, SVD};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QpError {
    #[error("QP dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("H is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("H is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("invalid solver options: {0}")]
    Options(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

impl QpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            QpStatus::Optimal => "optimal",
            QpStatus::Infeasible => "infeasible",
            QpStatus::MaxIterations => "max_iterations",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    h: Matrix,
    f: Vector,
    a: Matrix,
    b: Vector,
}

impl QpProblem {
    pub fn new(h: Matrix, f: Vector, a: Matrix, b: Vector) -> Result<Self, QpError> {
        let d = f.len();
        if h.nrows() != d || h.ncols() != d {
            return Err(QpError::Dimension(format!(
                "H is {}x{}, F has {d} entries",
                h.nrows(),
                h.ncols()
            )));
        }
        if a.ncols() != d || a.nrows() != b.len() {
            return Err(QpError::Dimension(format!(
                "A is {}x{}, b has {} entries, d = {d}",
                a.nrows(),
                a.ncols(),
                b.len()
            )));
        }
        for (name, s) in [
            ("H", h.as_slice()),
            ("F", f.as_slice()),
            ("A", a.as_slice()),
            ("b", b.as_slice()),
        ] {
            if s.iter().any(|v| !v.is_finite()) {
                return Err(QpError::NonFinite(name));
            }
        }
        let asym = (&h - h.transpose()).amax();
        if asym > 1e-12 * (1.0 + h.amax()) {
            return Err(QpError::NotSymmetric(asym));
        }
        if d > 0 {
            let min_eig = SymmetricEigen::new(h.clone()).eigenvalues.min();
            if min_eig < -1e-8 {
                return Err(QpError::NotPsd(min_eig));
            }
        }
        Ok(Self { h, f, a, b })
    }

    pub fn unconstrained(h: Matrix, f: Vector) -> Result<Self, QpError> {
        let d = f.len();
        Self::new(h, f, Matrix::zeros(0, d), Vector::zeros(0))
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn h(&self) -> &Matrix {
        &self.h
    }

    pub fn f(&self) -> &Vector {
        &self.f
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Vector {
        &self.b
    }

    pub fn objective(&self, w: &Vector) -> f64 {
        0.5 * w.dot(&(&self.h * w)) + self.f.dot(w)
    }

    /// `max_i (A w - b)_i`, or `-inf` without rows.
    pub fn max_violation(&self, w: &Vector) -> f64 {
        (&self.a * w - &self.b).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub w: Vector,
    pub objective: f64,
    /// One multiplier per row of `A`; zero when not optimal.
    pub multipliers: Vector,
    /// Rows in the final working set, ascending.
    pub active_set: Vec<usize>,
    pub status: QpStatus,
    /// For infeasible problems: `y >= 0`, `A'y ~ 0`, `b'y < 0`, max entry 1.
    pub certificate: Option<Vector>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpOptions {
    /// Tolerance on the scaled problem (rows have unit infinity norm).
    pub tol: f64,
    pub max_iter: usize,
    /// Added to the diagonal of `H` during the active-set iterations.
    pub regularization: f64,
}

impl Default for QpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 500,
            regularization: 1e-9,
        }
    }
}

impl QpOptions {
    fn validate(&self) -> Result<(), QpError> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(QpError::Options("tol must be positive".into()));
        }
        if !(self.regularization.is_finite() && self.regularization >= 0.0) {
            return Err(QpError::Options("regularization must be >= 0".into()));
        }
        if self.max_iter == 0 {
            return Err(QpError::Options("max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

struct Scaled {
    h: Matrix,
    h_reg: Matrix,
    f: Vector,
    a: Matrix,
    b: Vector,
    /// Original row index of each kept row.
    rows: Vec<usize>,
    row_scale: Vec<f64>,
    col_scale: Vector,
}

enum Prepared {
    Ready(Scaled),
    /// A zero row with a negative right-hand side.
    Contradiction(usize),
}

fn prepare(p: &QpProblem, opts: &QpOptions) -> Prepared {
    let d = p.dim();
    let rho = opts.regularization;
    let col_scale = Vector::from_iterator(
        d,
        (0..d).map(|j| {
            let hjj = p.h[(j, j)] + rho;
            if hjj > 10.0 * rho && hjj > 0.0 {
                1.0 / hjj.sqrt()
            } else {
                1.0
            }
        }),
    );
    let dmat = Matrix::from_diagonal(&col_scale);
    let h = &dmat * &p.h * &dmat;
    let mut h_reg = h.clone();
    for j in 0..d {
        h_reg[(j, j)] += rho * col_scale[j] * col_scale[j];
    }
    let f = p.f.component_mul(&col_scale);

    let mut rows = Vec::new();
    let mut row_scale = Vec::new();
    for i in 0..p.rows() {
        let norm = (0..d)
            .map(|j| (p.a[(i, j)] * col_scale[j]).abs())
            .fold(0.0, f64::max);
        if norm <= 1e-300 {
            if p.b[i] < -opts.tol {
                return Prepared::Contradiction(i);
            }
            continue;
        }
        rows.push(i);
        row_scale.push(1.0 / norm);
    }
    let a = Matrix::from_fn(rows.len(), d, |k, j| {
        p.a[(rows[k], j)] * col_scale[j] * row_scale[k]
    });
    let b = Vector::from_iterator(rows.len(), rows.iter().zip(&row_scale).map(|(&i, s)| p.b[i] * s));
    Prepared::Ready(Scaled {
        h,
        h_reg,
        f,
        a,
        b,
        rows,
        row_scale,
        col_scale,
    })
}

fn lstsq(m: &Matrix, rhs: &Vector) -> Vector {
    let svd = SVD::new(m.clone(), true, true);
    let eps = 1e-13 * svd.singular_values.max().max(1.0);
    svd.solve(rhs, eps).unwrap_or_else(|_| Vector::zeros(m.ncols()))
}

/// Lawson-Hanson NNLS: `min |E u - f|` over `u >= 0`.
fn nnls(e: &Matrix, f: &Vector, max_iter: usize) -> Vector {
    let n = e.ncols();
    let mut u = Vector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-13 * (1.0 + e.amax());
    for _ in 0..max_iter.max(3 * n) {
        let grad = e.transpose() * (f - e * &u);
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(b) if grad[b] >= grad[j] => Some(b),
                _ => Some(j),
            });
        let t = match candidate {
            Some(t) if grad[t] > tol => t,
            _ => break,
        };
        passive[t] = true;
        loop {
            let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let ep = e.select_columns(&idx);
            let sp = lstsq(&ep, f);
            if sp.iter().all(|&v| v > 0.0) {
                u.fill(0.0);
                for (k, &j) in idx.iter().enumerate() {
                    u[j] = sp[k];
                }
                break;
            }
            let mut alpha = f64::INFINITY;
            for (k, &j) in idx.iter().enumerate() {
                if sp[k] <= 0.0 {
                    let denom = u[j] - sp[k];
                    if denom > 0.0 {
                        alpha = alpha.min(u[j] / denom);
                    }
                }
            }
            if !alpha.is_finite() {
                alpha = 0.0;
            }
            for (k, &j) in idx.iter().enumerate() {
                u[j] += alpha * (sp[k] - u[j]);
                if u[j] <= 1e-15 {
                    u[j] = 0.0;
                    passive[j] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    u
}

enum Phase1 {
    Feasible(Vector),
    /// Non-negative weights on the scaled rows proving infeasibility.
    Infeasible(Vector),
    /// Refinement did not reach the tolerance.
    Stalled,
}

/// One least-distance solve: `Ok(x)` with `x` the (possibly inexact)
/// minimum-norm point of `{x : A x <= b}`, `Err(u)` with NNLS weights when
/// the residual says the set is empty.
fn ldp(a: &Matrix, b: &Vector, max_iter: usize) -> Result<Vector, Vector> {
    let (r, d) = a.shape();
    if r == 0 || b.iter().all(|&v| v >= 0.0) {
        return Ok(Vector::zeros(d));
    }
    let mut e = Matrix::zeros(d + 1, r);
    for i in 0..r {
        for j in 0..d {
            e[(j, i)] = -a[(i, j)];
        }
        e[(d, i)] = -b[i];
    }
    let mut f = Vector::zeros(d + 1);
    f[d] = 1.0;
    let u = nnls(&e, &f, max_iter);
    let res = &e * &u - &f;
    if res.norm_squared() > 1e-24 && res[d] < 0.0 {
        Ok(-res.rows(0, d) / res[d])
    } else {
        Err(u)
    }
}

/// Feasible point of `{x : A x <= b}` by least-distance programming. A far
/// away point is recovered with cancellation, so it is refined by solving
/// the problem again shifted to the current estimate.
fn phase1(a: &Matrix, b: &Vector, tol: f64, max_iter: usize) -> Phase1 {
    let mut x = match ldp(a, b, max_iter) {
        Ok(x) => x,
        Err(u) => return Phase1::Infeasible(u),
    };
    for _ in 0..8 {
        let slack = b - a * &x;
        let violation = -slack.min();
        if violation <= tol * (1.0 + x.amax()) {
            return Phase1::Feasible(x);
        }
        match ldp(a, &slack, max_iter) {
            Ok(dx) => x += dx,
            Err(u) => return Phase1::Infeasible(u),
        }
    }
    let violation = (a * &x - b).max();
    if violation <= tol * (1.0 + x.amax()) {
        Phase1::Feasible(x)
    } else {
        match ldp(a, b, max_iter) {
            Err(u) => Phase1::Infeasible(u),
            Ok(_) => Phase1::Stalled,
        }
    }
}

/// Step `p` and multipliers of `min 1/2 p'Hp + g'p` s.t. `A_W p = r`, by the
/// null-space method: the primal step meets the working rows to working
/// precision however large the multipliers get. `None` when the working rows
/// are dependent or the reduced Hessian is singular.
fn solve_kkt(h: &Matrix, a_w: &Matrix, g: &Vector, r: &Vector) -> Option<(Vector, Vector)> {
    let d = h.nrows();
    let k = a_w.nrows();
    if k > d {
        return None;
    }
    // QR of [A_W' I] gives a full orthonormal basis whose first k columns
    // span the row space of A_W
    let mut aug = Matrix::zeros(d, k + d);
    aug.view_mut((0, 0), (d, k)).copy_from(&a_w.transpose());
    aug.view_mut((0, k), (d, d)).fill_with_identity();
    let qr = aug.qr();
    let q = qr.q();
    let rr = qr.r();
    let r11 = rr.view((0, 0), (k, k)).into_owned();
    let scale = a_w.amax().max(1.0);
    if (0..k).any(|i| r11[(i, i)].abs() <= 1e-11 * scale) {
        return None;
    }
    let y = q.columns(0, k).into_owned();
    let z = q.columns(k, d - k).into_owned();
    let py = r11.transpose().solve_lower_triangular(r)?;
    let mut p = &y * &py;
    if d > k {
        let hp = h * &p;
        let reduced = z.transpose() * h * &z;
        let rhs = -(z.transpose() * (g + hp));
        let pz = match reduced.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => reduced.lu().solve(&rhs)?,
        };
        p += &z * pz;
    }
    let lam = r11.solve_upper_triangular(&(-(y.transpose() * (g + h * &p))))?;
    if p.iter().chain(lam.iter()).all(|v| v.is_finite()) {
        Some((p, lam))
    } else {
        None
    }
}

struct ActiveSetResult {
    x: Vector,
    lambda: Vector,
    working: Vec<usize>,
    status: QpStatus,
    iterations: usize,
}

fn active_set(s: &Scaled, x0: Vector, opts: &QpOptions) -> ActiveSetResult {
    let r = s.a.nrows();
    let mut x = x0;
    let mut working: Vec<usize> = Vec::new();
    let tol = opts.tol;
    for iter in 1..=opts.max_iter {
        let g = &s.h_reg * &x + &s.f;
        let a_w = s.a.select_rows(&working);
        // working rows hold with equality; absorb any leftover residual
        let r_w = s.b.select_rows(&working) - &a_w * &x;
        let Some((p, lam)) = solve_kkt(&s.h_reg, &a_w, &g, &r_w) else {
            // dependent working set; drop the newest row and retry
            working.pop();
            continue;
        };
        if p.amax() <= tol * (1.0 + x.amax()) {
            let drop = (0..working.len())
                .filter(|&k| lam[k] < -tol)
                .fold(None, |best: Option<usize>, k| match best {
                    Some(b) if lam[b] <= lam[k] => Some(b),
                    _ => Some(k),
                });
            match drop {
                Some(k) => {
                    working.remove(k);
                }
                None => {
                    let mut lambda = Vector::zeros(r);
                    for (k, &i) in working.iter().enumerate() {
                        lambda[i] = lam[k].max(0.0);
                    }
                    return ActiveSetResult {
                        x,
                        lambda,
                        working,
                        status: QpStatus::Optimal,
                        iterations: iter,
                    };
                }
            }
            continue;
        }
        let mut alpha = 1.0;
        let mut blocking = None;
        for i in (0..r).filter(|i| !working.contains(i)) {
            let ap = s.a.row(i).dot(&p.transpose());
            if ap > 1e-14 * p.amax() {
                let slack = (s.b[i] - s.a.row(i).dot(&x.transpose())).max(0.0);
                let step = slack / ap;
                if step < alpha {
                    alpha = step;
                    blocking = Some(i);
                }
            }
        }
        x += alpha * &p;
        if let Some(i) = blocking {
            working.push(i);
        }
    }
    ActiveSetResult {
        x,
        lambda: Vector::zeros(r),
        working,
        status: QpStatus::MaxIterations,
        iterations: opts.max_iter,
    }
}

/// Re-solves the final working set with the unregularized Hessian and keeps
/// the result when it stays primal and dual feasible.
fn polish(s: &Scaled, res: &mut ActiveSetResult, tol: f64) {
    let a_w = s.a.select_rows(&res.working);
    let g = &s.h * &res.x + &s.f;
    let r_w = s.b.select_rows(&res.working) - &a_w * &res.x;
    let Some((p, lam)) = solve_kkt(&s.h, &a_w, &g, &r_w) else {
        return;
    };
    let x = &res.x + &p;
    if !x.iter().all(|v| v.is_finite()) || lam.iter().any(|&l| l < -tol) {
        return;
    }
    if s.a.nrows() > 0 && (&s.a * &x - &s.b).max() > tol {
        return;
    }
    res.x = x;
    res.lambda.fill(0.0);
    for (k, &i) in res.working.iter().enumerate() {
        res.lambda[i] = lam[k].max(0.0);
    }
}

/// Phase 1 in coordinates equilibrated from `A` alone; the cost scaling can
/// shrink heavily weighted columns until they look like zeros. Falls back to
/// the cost-scaled coordinates. `Err(Some(y))` carries a certificate that
/// verifies on the original problem, `Err(None)` means neither attempt
/// settled the question.
fn feasible_start(p: &QpProblem, s: &Scaled, opts: &QpOptions) -> Result<Vector, Option<Vector>> {
    let d = p.dim();
    let r1: Vec<f64> = s
        .rows
        .iter()
        .map(|&i| 1.0 / p.a.row(i).amax())
        .collect();
    let e = Vector::from_iterator(
        d,
        (0..d).map(|j| {
            let m = s
                .rows
                .iter()
                .zip(&r1)
                .map(|(&i, rs)| (p.a[(i, j)] * rs).abs())
                .fold(0.0, f64::max);
            if m > 0.0 {
                1.0 / m
            } else {
                1.0
            }
        }),
    );
    let a1 = Matrix::from_fn(s.rows.len(), d, |k, j| p.a[(s.rows[k], j)] * r1[k] * e[j]);
    let b1 = Vector::from_iterator(s.rows.len(), s.rows.iter().zip(&r1).map(|(&i, rs)| p.b[i] * rs));
    let cert_tol = 1e-7 * (1.0 + p.a.amax());
    let certificate = |u: &Vector, scale: &[f64]| {
        let mut y = Vector::zeros(p.rows());
        for (k, &i) in s.rows.iter().enumerate() {
            y[i] = u[k] * scale[k];
        }
        let top = y.max();
        if top > 0.0 {
            y /= top;
        }
        verify_certificate(p, &y, cert_tol).then_some(y)
    };

    let mut cert = None;
    match phase1(&a1, &b1, opts.tol, opts.max_iter) {
        Phase1::Feasible(x) => {
            return Ok(x.component_mul(&e).component_div(&s.col_scale));
        }
        Phase1::Infeasible(u) => {
            cert = certificate(&u, &r1);
            if cert.is_some() {
                return Err(cert);
            }
        }
        Phase1::Stalled => {}
    }
    match phase1(&s.a, &s.b, opts.tol, opts.max_iter) {
        Phase1::Feasible(x) => Ok(x),
        Phase1::Infeasible(u) => Err(cert.or_else(|| certificate(&u, &s.row_scale))),
        Phase1::Stalled => Err(cert),
    }
}

pub fn solve(p: &QpProblem, opts: &QpOptions) -> Result<QpSolution, QpError> {
    opts.validate()?;
    let d = p.dim();
    let r = p.rows();
    let infeasible = |cert: Vector, iterations| QpSolution {
        w: Vector::zeros(d),
        objective: f64::NAN,
        multipliers: Vector::zeros(r),
        active_set: Vec::new(),
        status: QpStatus::Infeasible,
        certificate: Some(cert),
        iterations,
    };
    let s = match prepare(p, opts) {
        Prepared::Ready(s) => s,
        Prepared::Contradiction(i) => {
            let mut y = Vector::zeros(r);
            y[i] = 1.0;
            return Ok(infeasible(y, 0));
        }
    };
    let x0 = match feasible_start(p, &s, opts) {
        Ok(x) => x,
        Err(Some(y)) => return Ok(infeasible(y, 0)),
        Err(None) => {
            return Ok(QpSolution {
                status: QpStatus::MaxIterations,
                certificate: None,
                ..infeasible(Vector::zeros(r), 0)
            })
        }
    };
    let mut res = active_set(&s, x0, opts);
    if res.status == QpStatus::Optimal {
        polish(&s, &mut res, opts.tol);
    }
    let w = res.x.component_mul(&s.col_scale);
    let mut multipliers = Vector::zeros(r);
    for (k, &i) in s.rows.iter().enumerate() {
        multipliers[i] = res.lambda[k] * s.row_scale[k];
    }
    let mut active_set: Vec<usize> = res.working.iter().map(|&k| s.rows[k]).collect();
    active_set.sort_unstable();
    Ok(QpSolution {
        objective: p.objective(&w),
        w,
        multipliers,
        active_set,
        status: res.status,
        certificate: None,
        iterations: res.iterations,
    })
}

/// The four KKT residuals `(stationarity, primal, dual, complementarity)`,
/// all absolute.
pub fn kkt_residuals(p: &QpProblem, s: &QpSolution) -> [f64; 4] {
    let w = &s.w;
    let lam = &s.multipliers;
    let stationarity = (p.h() * w + p.f() + p.a().transpose() * lam).amax();
    let slack = p.a() * w - p.b();
    let primal = slack.iter().copied().fold(0.0, f64::max);
    let dual = lam.iter().map(|&l| -l).fold(0.0, f64::max);
    let comp = lam
        .iter()
        .zip(slack.iter())
        .map(|(l, s)| (l * s).abs())
        .fold(0.0, f64::max);
    [stationarity, primal, dual, comp]
}

/// True iff the solution is optimal and every KKT residual is within `tol`.
pub fn verify_kkt(p: &QpProblem, s: &QpSolution, tol: f64) -> bool {
    if s.status != QpStatus::Optimal
        || s.w.len() != p.dim()
        || s.multipliers.len() != p.rows()
    {
        return false;
    }
    kkt_residuals(p, s).iter().all(|&r| r.is_finite() && r <= tol)
}

/// Checks `y >= 0`, `|A'y|_inf <= tol` and `b'y < 0`.
pub fn verify_certificate(p: &QpProblem, y: &Vector, tol: f64) -> bool {
    y.len() == p.rows()
        && y.iter().all(|&v| v >= 0.0)
        && (p.a().transpose() * y).amax() <= tol
        && p.b().dot(y) < 0.0
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: usize, cols: usize, v: &[f64]) -> Matrix {
        Matrix::from_row_slice(rows, cols, v)
    }

    fn v(x: &[f64]) -> Vector {
        Vector::from_column_slice(x)
    }

    #[test]
    fn clamped_scalar() {
        let p = QpProblem::new(m(1, 1, &[2.0]), v(&[-2.0]), m(1, 1, &[1.0]), v(&[0.0])).unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!(s.w[0].abs() < 1e-12);
        assert!((s.multipliers[0] - 2.0).abs() < 1e-9);
        assert!(s.objective.abs() < 1e-12);
        assert!(verify_kkt(&p, &s, 1e-9));
    }

    #[test]
    fn unconstrained_minimum() {
        let p = QpProblem::unconstrained(m(2, 2, &[4.0, 1.0, 1.0, 3.0]), v(&[1.0, 2.0])).unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        let expected = -p.h().clone().lu().solve(p.f()).unwrap();
        assert!((s.w - expected).amax() < 1e-9);
    }

    #[test]
    fn contradictory_box_has_certificate() {
        let p =
            QpProblem::new(m(1, 1, &[1.0]), v(&[0.0]), m(2, 1, &[1.0, -1.0]), v(&[-1.0, -1.0]))
                .unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        let y = s.certificate.unwrap();
        assert!((y[0] - 1.0).abs() < 1e-9 && (y[1] - 1.0).abs() < 1e-9, "{y}");
        assert!(verify_certificate(&p, &y, 1e-9));
    }

    #[test]
    fn zero_row_contradiction() {
        let p = QpProblem::new(m(1, 1, &[1.0]), v(&[0.0]), m(1, 1, &[0.0]), v(&[-1.0])).unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        assert!(verify_certificate(&p, s.certificate.as_ref().unwrap(), 1e-12));
    }

    #[test]
    fn singular_hessian_with_linear_term() {
        // min x + y^2 s.t. x >= -3
        let p = QpProblem::new(
            m(2, 2, &[0.0, 0.0, 0.0, 2.0]),
            v(&[1.0, 0.0]),
            m(1, 2, &[-1.0, 0.0]),
            v(&[3.0]),
        )
        .unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!((s.w[0] + 3.0).abs() < 1e-9);
        assert!(verify_kkt(&p, &s, 1e-9));
    }

    #[test]
    fn verify_kkt_rejects_perturbations() {
        let p = QpProblem::new(m(1, 1, &[2.0]), v(&[-2.0]), m(1, 1, &[1.0]), v(&[0.0])).unwrap();
        let s = solve(&p, &QpOptions::default()).unwrap();
        let mut moved = s.clone();
        moved.w[0] += 1e-2;
        assert!(!verify_kkt(&p, &moved, 1e-6));
        let mut neg = s.clone();
        neg.multipliers[0] = -1.0;
        assert!(!verify_kkt(&p, &neg, 1e-6));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            QpProblem::unconstrained(m(1, 1, &[-1.0]), v(&[0.0])),
            Err(QpError::NotPsd(_))
        ));
        assert!(matches!(
            QpProblem::unconstrained(m(2, 2, &[1.0, 0.5, 0.0, 1.0]), v(&[0.0, 0.0])),
            Err(QpError::NotSymmetric(_))
        ));
        assert!(matches!(
            QpProblem::unconstrained(m(1, 1, &[f64::NAN]), v(&[0.0])),
            Err(QpError::NonFinite("H"))
        ));
        assert!(QpProblem::unconstrained(m(1, 1, &[1.0]), v(&[0.0, 1.0])).is_err());
    }
}
