//! Discrete spaces: continuous Lagrange elements for deflections,
//! Hellan-Herrmann-Johnson elements for moment tensors and Clough-Tocher
//! macro elements for conforming recovery.

pub mod c1;
pub mod hhj;
pub mod lagrange;

use crate::geometry::{Point, Sym};
use crate::mesh::Mesh;
use crate::poly;
use crate::quadrature;

pub use c1::{composite_piece_rule, piece_of, C1Field, C1Space, C1Variant};
pub use hhj::{HhjElement, HhjSpace, MomentField};
pub use lagrange::{LagrangeSpace, ScalarField};

/// Vertices of the reference triangle.
pub const REF_VERTICES: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Reference point at parameter `s` along local edge `i`, which runs from
/// local vertex `i+1` to local vertex `i+2`.
#[inline]
pub fn local_edge_point(i: usize, s: f64) -> Point {
    let a = REF_VERTICES[(i + 1) % 3];
    let b = REF_VERTICES[(i + 2) % 3];
    [a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])]
}

/// Local index of global edge `e` in triangle `t`.
pub fn local_edge_index(mesh: &Mesh, t: usize, e: usize) -> usize {
    mesh.triangle_edges(t)
        .iter()
        .position(|&x| x == e)
        .expect("edge does not belong to triangle")
}

/// Reference point of `t` at global parameter `s` (measured from `V1`) on
/// edge `e`.
pub fn edge_ref_point(mesh: &Mesh, t: usize, e: usize, s: f64) -> Point {
    let i = local_edge_index(mesh, t, e);
    let sl = if mesh.is_left(t, i) { s } else { 1.0 - s };
    local_edge_point(i, sl)
}

/// Value, gradient and Hessian of a scalar function at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet2 {
    pub val: f64,
    pub grad: Point,
    pub hess: Sym,
}

/// Element-wise polynomial `f̄` of degree `deg`: `coeffs[t]` holds the
/// coefficients with respect to the orthonormal reference basis of
/// [`poly::orthonormal_triangle_basis`]. A negative degree denotes the zero
/// function.
#[derive(Clone, Debug)]
pub struct PiecewisePolynomial {
    pub degree: i32,
    pub coeffs: Vec<Vec<f64>>,
}

impl PiecewisePolynomial {
    pub fn eval(&self, t: usize, xi: Point) -> f64 {
        if self.degree < 0 {
            return 0.0;
        }
        let d = self.degree as usize;
        let basis = poly::orthonormal_triangle_basis(d);
        let m = poly::monomial_values(d, xi[0], xi[1]);
        let c = &self.coeffs[t];
        (0..c.len())
            .map(|i| c[i] * (0..m.len()).map(|a| basis[(i, a)] * m[a]).sum::<f64>())
            .sum()
    }
}

/// Element-wise `L2` projection onto polynomials of degree `deg`
/// (`deg < 0` gives zero). `quad_degree` controls the load quadrature.
pub fn l2_project_piecewise(
    mesh: &Mesh,
    f: &dyn Fn(Point) -> f64,
    deg: i32,
    quad_degree: usize,
) -> crate::Result<PiecewisePolynomial> {
    if deg < 0 {
        return Ok(PiecewisePolynomial {
            degree: deg,
            coeffs: vec![Vec::new(); mesh.num_triangles()],
        });
    }
    let d = deg as usize;
    let rule = quadrature::triangle_rule(quad_degree.max(2 * d))?;
    let basis = poly::orthonormal_triangle_basis(d);
    let n = poly::dim_p(deg);
    let qvals: Vec<Vec<f64>> = rule
        .points
        .iter()
        .map(|p| {
            let m = poly::monomial_values(d, p[0], p[1]);
            (0..n)
                .map(|i| (0..m.len()).map(|a| basis[(i, a)] * m[a]).sum())
                .collect()
        })
        .collect();
    let coeffs = (0..mesh.num_triangles())
        .map(|t| {
            let map = mesh.affine(t);
            let mut c = vec![0.0; n];
            for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                let fx = f(map.to_physical(*p));
                for i in 0..n {
                    c[i] += 2.0 * w * fx * qvals[q][i];
                }
            }
            c
        })
        .collect();
    Ok(PiecewisePolynomial { degree: deg, coeffs })
}
