//! Self-consistency of the discrete reference used for the mixed boundary
//! condition benchmark.

use std::sync::Arc;

use kirchhoff::benchmarks::{timoshenko_mixed_case, timoshenko_reference, REFERENCE_K, REFERENCE_N};
use kirchhoff::estimator::exact_dg_error;
use kirchhoff::ipdg::{self, IpdgProblem};

/// The reference differs from its half-resolution version by much less
/// than the error of the finest `k = 2` solution it is used to measure, so
/// that measured errors are affected by less than one percent.
#[test]
fn reference_error_is_negligible() {
    let case = timoshenko_mixed_case();
    let fine = case.exact().unwrap();
    let coarse = timoshenko_reference(REFERENCE_N / 2, REFERENCE_K).unwrap();
    let alpha = case.alpha(2);
    let delta = exact_dg_error(&coarse.field, fine, alpha).unwrap();
    let mesh = Arc::new(case.mesh(64).unwrap());
    let u = ipdg::solve(&IpdgProblem::new(mesh, 2, case.load.clone()).with_alpha(alpha)).unwrap();
    let err = exact_dg_error(&u, fine, alpha).unwrap();
    println!("reference self-difference {delta:.3e}, k=2 n=64 error {err:.3e}");
    // sqrt(1 + 0.14²) < 1.01.
    assert!(delta <= 0.14 * err, "{delta} vs {err}");
}
