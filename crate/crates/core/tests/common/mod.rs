#![allow(dead_code)]

use adacbf::numerics::{Matrix, Vector};
use adacbf::qp::QpProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Best objective over all equality-constrained KKT points of active subsets
/// of size `<= d` that are primal feasible. `None` means no subset is
/// feasible, i.e. the problem is infeasible.
pub fn brute_force_objective(p: &QpProblem) -> Option<f64> {
    let d = p.dim();
    let r = p.rows();
    let mut best: Option<f64> = None;
    let mut subset = Vec::new();
    enumerate(r, d, 0, &mut subset, &mut |rows| {
        let k = rows.len();
        let mut kkt = Matrix::zeros(d + k, d + k);
        kkt.view_mut((0, 0), (d, d)).copy_from(p.h());
        let mut rhs = Vector::zeros(d + k);
        rhs.rows_mut(0, d).copy_from(&(-p.f()));
        for (c, &i) in rows.iter().enumerate() {
            for j in 0..d {
                kkt[(d + c, j)] = p.a()[(i, j)];
                kkt[(j, d + c)] = p.a()[(i, j)];
            }
            rhs[d + c] = p.b()[i];
        }
        let Some(sol) = kkt.lu().solve(&rhs) else {
            return;
        };
        if !sol.iter().all(|v| v.is_finite()) {
            return;
        }
        let w = sol.rows(0, d).into_owned();
        if r > 0 && p.max_violation(&w) > 1e-9 {
            return;
        }
        let obj = p.objective(&w);
        if best.is_none_or(|b| obj < b) {
            best = Some(obj);
        }
    });
    best
}

fn enumerate(r: usize, max: usize, start: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
    f(cur);
    if cur.len() == max {
        return;
    }
    for i in start..r {
        cur.push(i);
        enumerate(r, max, i + 1, cur, f);
        cur.pop();
    }
}

/// Random strictly convex QP with `d <= 8`, `r <= 12`. Roughly a third of the
/// instances have a random right-hand side that may be infeasible.
pub fn random_qp(seed: u64) -> QpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = rng.random_range(1..=8);
    let r = rng.random_range(0..=12);
    let k = rng.random_range(1..=d);
    let l = Matrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
    let mut h = &l * l.transpose();
    for j in 0..d {
        h[(j, j)] += 0.05;
    }
    let h = (&h + h.transpose()) * 0.5;
    let f = Vector::from_fn(d, |_, _| rng.random_range(-5.0..5.0));
    let a = Matrix::from_fn(r, d, |_, _| rng.random_range(-1.0..1.0));
    let b = if rng.random_bool(0.66) {
        let w0 = Vector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        &a * w0 + Vector::from_fn(r, |_, _| rng.random_range(0.0..1.0))
    } else {
        Vector::from_fn(r, |_, _| rng.random_range(-2.0..1.0))
    };
    QpProblem::new(h, f, a, b).expect("generated problem is valid")
}
