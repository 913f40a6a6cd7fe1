mod common;

use adacbf::numerics::{Matrix, Vector};
use adacbf::qp::{self, QpOptions, QpProblem, QpStatus};
use proptest::prelude::*;

fn check_against_oracle(p: &QpProblem) -> Result<(), String> {
    let s = qp::solve(p, &QpOptions::default()).map_err(|e| e.to_string())?;
    match (common::brute_force_objective(p), s.status) {
        (Some(best), QpStatus::Optimal) => {
            if (s.objective - best).abs() > 1e-6 * best.abs().max(1.0) {
                return Err(format!("objective {} vs oracle {best}", s.objective));
            }
            if !qp::verify_kkt(p, &s, 1e-7) {
                return Err(format!("KKT residuals {:?}", qp::kkt_residuals(p, &s)));
            }
        }
        (None, QpStatus::Infeasible) => {
            let y = s.certificate.as_ref().ok_or("missing certificate")?;
            if !qp::verify_certificate(p, y, 1e-7) {
                return Err(format!("bad certificate {y}"));
            }
        }
        (oracle, status) => return Err(format!("oracle {oracle:?}, solver {status:?}")),
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn matches_brute_force(seed in any::<u64>()) {
        let p = common::random_qp(seed);
        prop_assert!(check_against_oracle(&p).is_ok(), "{:?}", check_against_oracle(&p));
    }

    #[test]
    fn deterministic(seed in any::<u64>()) {
        let p = common::random_qp(seed);
        let a = qp::solve(&p, &QpOptions::default()).unwrap();
        let b = qp::solve(&p, &QpOptions::default()).unwrap();
        prop_assert_eq!(a.w.as_slice(), b.w.as_slice());
        prop_assert_eq!(a.active_set, b.active_set);
    }

    #[test]
    fn regularization_barely_moves_objective(seed in any::<u64>()) {
        let p = common::random_qp(seed);
        let plain = qp::solve(&p, &QpOptions::default()).unwrap();
        prop_assume!(plain.status == QpStatus::Optimal);
        let rho = 1e-9;
        let h = p.h() + Matrix::identity(p.dim(), p.dim()) * rho;
        let reg = QpProblem::new(h, p.f().clone(), p.a().clone(), p.b().clone()).unwrap();
        let s = qp::solve(&reg, &QpOptions::default()).unwrap();
        let bound = rho * plain.w.norm_squared() + 1e-10;
        prop_assert!((s.objective - plain.objective).abs() <= bound);
    }
}

#[test]
fn fixed_seed_suite() {
    let failures: Vec<_> = (0..500u64)
        .filter_map(|seed| check_against_oracle(&common::random_qp(seed)).err().map(|e| (seed, e)))
        .collect();
    assert!(failures.is_empty(), "{failures:?}");
}

#[test]
fn degenerate_duplicate_rows() {
    // the same half-space three times plus a parallel weaker one
    let a = Matrix::from_row_slice(4, 2, &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 1.0, 1.0]);
    let b = Vector::from_column_slice(&[-1.0, -1.0, -2.0, 0.0]);
    let p = QpProblem::new(Matrix::identity(2, 2), Vector::zeros(2), a, b).unwrap();
    let s = qp::solve(&p, &QpOptions::default()).unwrap();
    assert_eq!(s.status, QpStatus::Optimal);
    assert!((s.w[0] + 0.5).abs() < 1e-9 && (s.w[1] + 0.5).abs() < 1e-9);
    assert!(qp::verify_kkt(&p, &s, 1e-9));
}
