//! Benchmark problems: a singular solution on the L-shaped domain, a plate
//! with clamped, simply supported and free edges, and a smooth manufactured
//! solution.

mod reference;
pub mod taylor;

use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

pub use reference::ReferenceSolution;
pub use taylor::Taylor;

use crate::adaptivity::{solve_and_estimate, Discretization, Method};
use crate::error::Result;
use crate::estimator::ErrorReport;
use crate::geometry::Point;
use crate::ipdg::{self, IpdgProblem};
use crate::mesh::{BcKind, BoundarySpec, Mesh};
use crate::problem::{ClosedForm, ElementRule, ExactSolution, Load};
use crate::spaces::Jet2;

/// Interior angle of the re-entrant corner.
pub const OMEGA: f64 = 1.5 * PI;
/// Published root of `sin²(ωz) = z² sin²ω` for `ω = 3π/2`.
pub const Z_PUBLISHED: f64 = 0.5444837;

/// Residual `sin²(ωz) - z² sin²ω`.
pub fn root_residual(z: f64) -> f64 {
    (OMEGA * z).sin().powi(2) - z * z * OMEGA.sin().powi(2)
}

/// The root near [`Z_PUBLISHED`] to full precision (Newton's method).
pub fn singular_exponent() -> f64 {
    let mut z = Z_PUBLISHED;
    for _ in 0..20 {
        let (s, c) = (OMEGA * z).sin_cos();
        let d = 2.0 * s * c * OMEGA - 2.0 * z * OMEGA.sin().powi(2);
        let step = root_residual(z) / d;
        z -= step;
        if step.abs() < 1e-16 {
            break;
        }
    }
    z
}

/// Taylor expansion of the singular solution
/// `u = (x²-1)²(y²-1)² r^{1+z} g(φ)` at `x` (not at the origin).
pub fn lshape_taylor(x: Point, z: f64) -> Taylor {
    let tx = Taylor::var_x(x[0]);
    let ty = Taylor::var_y(x[1]);
    let one = Taylor::constant(1.0);
    let bx = tx * tx - one;
    let by = ty * ty - one;
    let radial = (tx * tx + ty * ty).powf(0.5 * (1.0 + z));
    let phi = Taylor::polar_angle(&tx, &ty);
    let (zm, zp) = (z - 1.0, z + 1.0);
    let a = (zm * OMEGA).sin() / zm - (zp * OMEGA).sin() / zp;
    let b = (zm * OMEGA).cos() - (zp * OMEGA).cos();
    let g = ((phi * zm).cos() - (phi * zp).cos()) * a - ((phi * zm).sin() * (1.0 / zm) - (phi * zp).sin() * (1.0 / zp)) * b;
    bx * bx * by * by * radial * g
}

fn jet_of(t: &Taylor) -> Jet2 {
    Jet2 {
        val: t.value(),
        grad: t.gradient(),
        hess: t.hessian(),
    }
}

/// A benchmark problem.
#[derive(Clone)]
pub struct BenchmarkCase {
    pub name: &'static str,
    pub domain: Domain,
    pub spec: BoundarySpec,
    pub load: Load,
    pub exact: Option<Arc<dyn ExactSolution>>,
    /// Penalty factor `α_0` in `α = α_0 (k+1)²`.
    pub alpha0: f64,
}

impl std::fmt::Debug for BenchmarkCase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkCase")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("alpha0", &self.alpha0)
            .finish_non_exhaustive()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Domain {
    UnitSquare,
    LShape,
}

impl BenchmarkCase {
    /// Structured mesh with `n` cells per unit length.
    pub fn mesh(&self, n: usize) -> Result<Mesh> {
        match self.domain {
            Domain::UnitSquare => Mesh::unit_square(n, &self.spec),
            Domain::LShape => Mesh::l_shape(n, &self.spec),
        }
    }

    pub fn alpha(&self, k: usize) -> f64 {
        self.alpha0 * ((k + 1) * (k + 1)) as f64
    }

    pub fn exact(&self) -> Option<&dyn ExactSolution> {
        self.exact.as_deref()
    }

    /// Looks a case up by its name.
    pub fn by_name(name: &str) -> Option<Self> {
        match name {
            "lshape" => Some(lshape_singular_case()),
            "smooth" => Some(smooth_manufactured_case()),
            "timoshenko" => Some(timoshenko_mixed_case()),
            _ => None,
        }
    }
}

/// The singular solution on `(-1,1)² \ [0,1)×(-1,0]` with clamped boundary
/// and `α = (k+1)²`.
pub fn lshape_singular_case() -> BenchmarkCase {
    let z = singular_exponent();
    let origin = [0.0, 0.0];
    let near_origin = |x: Point| x[0].hypot(x[1]) < 1e-300;
    let load = Load::new(move |x| {
        if near_origin(x) {
            return 0.0;
        }
        lshape_taylor(x, z).bilaplacian()
    })
    .with_singularity(origin);
    let exact = ClosedForm::new(
        move |x| {
            // Value and gradient vanish at the corner; the Hessian is
            // unbounded there and never sampled by the quadrature.
            if near_origin(x) {
                return Jet2::default();
            }
            jet_of(&lshape_taylor(x, z))
        },
        Some(origin),
    );
    BenchmarkCase {
        name: "lshape",
        domain: Domain::LShape,
        spec: BoundarySpec::clamped(),
        load,
        exact: Some(Arc::new(exact)),
        alpha0: 1.0,
    }
}

/// `sin²(πx) sin²(πy)` on the clamped unit square.
pub fn smooth_exact(x: Point) -> Jet2 {
    let (sx, sy) = ((PI * x[0]).sin(), (PI * x[1]).sin());
    let (s2x, c2x) = (2.0 * PI * x[0]).sin_cos();
    let (s2y, c2y) = (2.0 * PI * x[1]).sin_cos();
    let (fx, fy) = (sx * sx, sy * sy);
    let (dfx, dfy) = (PI * s2x, PI * s2y);
    let (ddfx, ddfy) = (2.0 * PI * PI * c2x, 2.0 * PI * PI * c2y);
    Jet2 {
        val: fx * fy,
        grad: [dfx * fy, fx * dfy],
        hess: [ddfx * fy, dfx * dfy, fx * ddfy],
    }
}

/// `Δ²` of [`smooth_exact`].
pub fn smooth_load(x: Point) -> f64 {
    let p4 = PI.powi(4);
    let c2x = (2.0 * PI * x[0]).cos();
    let c2y = (2.0 * PI * x[1]).cos();
    let sx2 = (PI * x[0]).sin().powi(2);
    let sy2 = (PI * x[1]).sin().powi(2);
    -8.0 * p4 * (c2x * sy2 + sx2 * c2y) + 8.0 * p4 * c2x * c2y
}

pub fn smooth_manufactured_case() -> BenchmarkCase {
    BenchmarkCase {
        name: "smooth",
        domain: Domain::UnitSquare,
        spec: BoundarySpec::clamped(),
        load: Load::new(smooth_load),
        exact: Some(Arc::new(ClosedForm::new(smooth_exact, None))),
        alpha0: 1.0,
    }
}

/// Simply supported at `x = 0` and `x = 1`, clamped at `y = 0`, free at
/// `y = 1`.
pub fn timoshenko_spec() -> BoundarySpec {
    BoundarySpec::uniform(BcKind::SimplySupported)
        .with_segment([0.0, 0.0], [1.0, 0.0], BcKind::Clamped)
        .with_segment([0.0, 1.0], [1.0, 1.0], BcKind::Free)
}

/// Resolution of the default reference solution.
pub const REFERENCE_N: usize = 128;
/// Polynomial degree of the reference solution.
pub const REFERENCE_K: usize = 3;

/// Interior penalty solution of degree `k` on the structured `n×n` mesh for
/// the plate with mixed boundary conditions and unit load.
pub fn timoshenko_reference(n: usize, k: usize) -> Result<ReferenceSolution> {
    let mesh = Arc::new(Mesh::unit_square(n, &timoshenko_spec())?);
    let alpha = 2.0 * ((k + 1) * (k + 1)) as f64;
    let u = ipdg::solve(&IpdgProblem::new(mesh, k, Load::constant(1.0)).with_alpha(alpha))?;
    ReferenceSolution::new(n, u)
}

/// The default reference, computed on first use.
#[derive(Debug, Default)]
pub struct LazyReference {
    cell: OnceLock<ReferenceSolution>,
}

impl LazyReference {
    pub fn get(&self) -> &ReferenceSolution {
        self.cell.get_or_init(|| {
            timoshenko_reference(REFERENCE_N, REFERENCE_K).expect("reference solve on a structured mesh failed")
        })
    }
}

impl ExactSolution for LazyReference {
    fn jet(&self, x: Point) -> Jet2 {
        self.get().jet(x)
    }

    fn error_rule(&self, mesh: &Mesh, t: usize, deg: usize) -> Result<ElementRule> {
        self.get().error_rule(mesh, t, deg)
    }
}

/// Unit load on the square with mixed boundary conditions and
/// `α = 2(k+1)²`; the exact solution is a fine reference solution.
pub fn timoshenko_mixed_case() -> BenchmarkCase {
    BenchmarkCase {
        name: "timoshenko",
        domain: Domain::UnitSquare,
        spec: timoshenko_spec(),
        load: Load::constant(1.0),
        exact: Some(Arc::new(LazyReference::default())),
        alpha0: 2.0,
    }
}

/// One pipeline run per penalty factor on the same mesh.
pub fn alpha_sweep(
    case: &BenchmarkCase,
    mesh: &Mesh,
    k: usize,
    method: Method,
    alpha0s: &[f64],
) -> Result<Vec<(f64, ErrorReport)>> {
    let mesh = Arc::new(mesh.clone());
    alpha0s
        .iter()
        .map(|&a0| {
            let disc = Discretization {
                method,
                k,
                alpha: a0 * ((k + 1) * (k + 1)) as f64,
            };
            let r = solve_and_estimate(Arc::clone(&mesh), &disc, &case.load, case.exact())?;
            Ok((a0, r.report))
        })
        .collect()
}
