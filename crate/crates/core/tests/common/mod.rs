#![allow(dead_code)]

use std::sync::Arc;

use kirchhoff::spaces::{HhjSpace, LagrangeSpace, MomentField, ScalarField};
use proptest::prelude::Rng;
use proptest::test_runner::{RngAlgorithm, TestRng};

pub fn rng(seed: u8) -> TestRng {
    TestRng::from_seed(RngAlgorithm::ChaCha, &[seed; 32])
}

/// Random field with the constrained coefficients set to zero.
pub fn random_deflection(space: &Arc<LagrangeSpace>, rng: &mut TestRng) -> ScalarField {
    let c = space
        .constrained()
        .iter()
        .map(|&fixed| if fixed { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    ScalarField::new(Arc::clone(space), c).unwrap()
}

pub fn random_moment(space: &Arc<HhjSpace>, rng: &mut TestRng) -> MomentField {
    let c = space
        .constrained()
        .iter()
        .map(|&fixed| if fixed { 0.0 } else { rng.random_range(-1.0..1.0) })
        .collect();
    MomentField::new(Arc::clone(space), c).unwrap()
}

/// Bilaplacian of `u` at `x` from the 13-point stencil, extrapolated over
/// the steps `h`, `h/2`, `h/4` to sixth order.
pub fn fd_bilaplacian(u: &dyn Fn([f64; 2]) -> f64, x: [f64; 2], h: f64) -> f64 {
    let stencil = |h: f64| {
        let v = |i: f64, j: f64| u([x[0] + i * h, x[1] + j * h]);
        (20.0 * v(0.0, 0.0) - 8.0 * (v(1.0, 0.0) + v(-1.0, 0.0) + v(0.0, 1.0) + v(0.0, -1.0))
            + 2.0 * (v(1.0, 1.0) + v(1.0, -1.0) + v(-1.0, 1.0) + v(-1.0, -1.0))
            + v(2.0, 0.0)
            + v(-2.0, 0.0)
            + v(0.0, 2.0)
            + v(0.0, -2.0))
            / h.powi(4)
    };
    let d = [stencil(h), stencil(h / 2.0), stencil(h / 4.0)];
    let r1 = (4.0 * d[1] - d[0]) / 3.0;
    let r2 = (4.0 * d[2] - d[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// Points of the L-shaped domain at distance at least `0.1` from its
/// boundary and `r0` from the re-entrant corner.
pub fn lshape_sample_points(count: usize, r0: f64, rng: &mut TestRng) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    while out.len() < count {
        let p: [f64; 2] = [rng.random_range(-0.9..0.9), rng.random_range(-0.9..0.9)];
        let inside = !(p[0] > -0.1 && p[1] < 0.1);
        if inside && p[0].hypot(p[1]) >= r0 {
            out.push(p);
        }
    }
    out
}
