//! The benchmark loads against finite-difference bilaplacians of the exact
//! solutions.

mod common;

use std::f64::consts::PI;

use kirchhoff::benchmarks::{lshape_singular_case, smooth_exact, smooth_load};

#[test]
fn lshape_load_matches_fd_bilaplacian() {
    let case = lshape_singular_case();
    let ex = case.exact().unwrap();
    let u = |x: [f64; 2]| ex.jet(x).val;
    let mut rng = common::rng(3);
    for x in common::lshape_sample_points(20, 0.4, &mut rng) {
        let fd = common::fd_bilaplacian(&u, x, 0.04);
        let f = case.load.eval(x);
        assert!((fd - f).abs() <= 1e-5 * f.abs(), "at {x:?}: fd {fd} vs load {f}");
    }
}

#[test]
fn smooth_load_matches_fd_and_closed_form() {
    let u = |x: [f64; 2]| smooth_exact(x).val;
    let x = [0.5, 0.5];
    // Δ² of sin²(πx) sin²(πy) at the centre is 24π⁴.
    let closed = 24.0 * PI.powi(4);
    assert!((smooth_load(x) - closed).abs() <= 1e-12 * closed);
    let fd = common::fd_bilaplacian(&u, x, 0.05);
    assert!((fd - closed).abs() <= 1e-8 * closed, "fd {fd} vs {closed}");
    let mut rng = common::rng(5);
    for _ in 0..10 {
        use proptest::prelude::Rng;
        let x = [rng.random_range(0.1..0.9), rng.random_range(0.1..0.9)];
        let f = smooth_load(x);
        let fd = common::fd_bilaplacian(&u, x, 0.05);
        assert!((fd - f).abs() <= 1e-7 * (1.0 + f.abs()), "at {x:?}: fd {fd} vs {f}");
    }
}
