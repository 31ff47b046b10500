//! Continuous piecewise polynomials of degree `k` with vertex values,
//! normalized edge moments and interior moments as degrees of freedom.
//!
//! The functionals are
//! * `v(x)` for every vertex `x`,
//! * `(1/|E|) ∫_E v L_j ds`, `j = 0..=k-2`, with `L_j` the orthonormal
//!   Legendre polynomials in the global edge parameter (`V1 → V2`),
//! * `(1/|T|) ∫_T v q_m dx` with `q_m` the orthonormal basis of `P^{k-3}`
//!   on the reference element.
//!
//! All three families are invariant under affine maps, so the local dual
//! basis is computed once on the reference element; only the sign of odd
//! edge moments depends on the element.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{local_edge_point, Jet2, REF_VERTICES};
use crate::error::{Error, Result};
use crate::geometry::{AffineMap, Point};
use crate::mesh::Mesh;
use crate::poly::{self, MonomialValues};
use crate::quadrature;

#[derive(Debug)]
pub struct LagrangeSpace {
    mesh: Arc<Mesh>,
    k: usize,
    /// Rows: local basis functions; columns: reference monomials.
    coef: DMatrix<f64>,
    constrained: Vec<bool>,
}

/// Physical basis values of one element at a set of points.
#[derive(Clone, Debug)]
pub struct ScalarTab {
    pub nbasis: usize,
    /// `[point][basis]`
    pub data: Vec<Jet2>,
}

impl ScalarTab {
    #[inline]
    pub fn at(&self, q: usize, b: usize) -> &Jet2 {
        &self.data[q * self.nbasis + b]
    }

    /// Combination `Σ_b c_b φ_b` at point `q`.
    pub fn combine(&self, q: usize, c: &[f64]) -> Jet2 {
        let mut out = Jet2::default();
        for (b, &cb) in c.iter().enumerate() {
            let j = self.at(q, b);
            out.val += cb * j.val;
            for i in 0..2 {
                out.grad[i] += cb * j.grad[i];
            }
            for i in 0..3 {
                out.hess[i] += cb * j.hess[i];
            }
        }
        out
    }
}

impl LagrangeSpace {
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if !(2..=6).contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree k = {k} is outside 2..=6"
            )));
        }
        let coef = reference_dual_basis(k);
        let mut constrained = vec![false; mesh.num_vertices() + (k - 1) * mesh.num_edges()
            + poly::dim_p(k as i32 - 3) * mesh.num_triangles()];
        let nv = mesh.num_vertices();
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary.is_some_and(|b| b.fixes_deflection()) {
                constrained[edge.vertices[0]] = true;
                constrained[edge.vertices[1]] = true;
                for j in 0..k - 1 {
                    constrained[nv + e * (k - 1) + j] = true;
                }
            }
        }
        Ok(Self {
            mesh,
            k,
            coef,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.constrained.len()
    }

    /// Number of unconstrained degrees of freedom (the dimension of `V_h^0`).
    pub fn num_free(&self) -> usize {
        self.constrained.iter().filter(|&&c| !c).count()
    }

    /// Degrees of freedom fixed to zero by the essential condition `u = 0`
    /// on clamped and simply supported edges.
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn local_dim(&self) -> usize {
        poly::dim_p(self.k as i32)
    }

    fn interior_per_element(&self) -> usize {
        poly::dim_p(self.k as i32 - 3)
    }

    /// Global indices and signs of the local basis functions of `t`: the
    /// global basis function equals `sign * local`.
    pub fn local_dofs(&self, t: usize) -> (Vec<usize>, Vec<f64>) {
        let k = self.k;
        let nv = self.mesh.num_vertices();
        let ne = self.mesh.num_edges();
        let n = self.local_dim();
        let mut idx = Vec::with_capacity(n);
        let mut sgn = Vec::with_capacity(n);
        for v in self.mesh.triangle(t) {
            idx.push(v);
            sgn.push(1.0);
        }
        let edges = self.mesh.triangle_edges(t);
        for (i, &e) in edges.iter().enumerate() {
            let left = self.mesh.is_left(t, i);
            for j in 0..k - 1 {
                idx.push(nv + e * (k - 1) + j);
                sgn.push(if left || j % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        let ni = self.interior_per_element();
        for m in 0..ni {
            idx.push(nv + ne * (k - 1) + t * ni + m);
            sgn.push(1.0);
        }
        (idx, sgn)
    }

    /// Values and physical derivatives of the (signed) local basis of `t` at
    /// reference points.
    pub fn tabulate(&self, t: usize, points: &[Point]) -> ScalarTab {
        let map = self.mesh.affine(t);
        let (_, sgn) = self.local_dofs(t);
        self.tabulate_with(&map, &sgn, points)
    }

    fn tabulate_with(&self, map: &AffineMap, sgn: &[f64], points: &[Point]) -> ScalarTab {
        let n = self.local_dim();
        let mut mv = MonomialValues::new(self.k);
        let mut data = Vec::with_capacity(points.len() * n);
        for p in points {
            poly::eval_monomials(self.k, p[0], p[1], &mut mv);
            for b in 0..n {
                let row = self.coef.row(b);
                let mut v = 0.0;
                let mut g = [0.0; 2];
                let mut h = [0.0; 3];
                for a in 0..mv.len() {
                    let c = row[a];
                    if c == 0.0 {
                        continue;
                    }
                    v += c * mv.val[a];
                    g[0] += c * mv.dx[a];
                    g[1] += c * mv.dy[a];
                    h[0] += c * mv.dxx[a];
                    h[1] += c * mv.dxy[a];
                    h[2] += c * mv.dyy[a];
                }
                let s = sgn[b];
                let g = map.grad(g);
                let h = map.hess(h);
                data.push(Jet2 {
                    val: s * v,
                    grad: [s * g[0], s * g[1]],
                    hess: [s * h[0], s * h[1], s * h[2]],
                });
            }
        }
        ScalarTab { nbasis: n, data }
    }

    /// `I_h v`: the element of the space sharing all degrees of freedom with
    /// `v`. Moments are computed with a rule of degree `quad_degree`.
    pub fn interpolate(
        self: &Arc<Self>,
        v: &dyn Fn(Point) -> f64,
        quad_degree: usize,
    ) -> Result<ScalarField> {
        let mesh = &self.mesh;
        let k = self.k;
        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let mut c = vec![0.0; self.dim()];
        for (i, p) in mesh.vertices().iter().enumerate() {
            c[i] = v(*p);
        }
        let erule = quadrature::edge_rule(quad_degree)?;
        for e in 0..ne {
            for (p, w) in erule.points.iter().zip(&erule.weights) {
                let fx = v(mesh.edge_point(e, p[0]));
                let l = poly::legendre01(k - 2, p[0]);
                for j in 0..k - 1 {
                    c[nv + e * (k - 1) + j] += w * fx * l[j];
                }
            }
        }
        let ni = self.interior_per_element();
        if ni > 0 {
            let trule = quadrature::triangle_rule(quad_degree)?;
            let basis = poly::orthonormal_triangle_basis(k - 3);
            for t in 0..mesh.num_triangles() {
                let map = mesh.affine(t);
                for (p, w) in trule.points.iter().zip(&trule.weights) {
                    let fx = v(map.to_physical(*p));
                    let m = poly::monomial_values(k - 3, p[0], p[1]);
                    for i in 0..ni {
                        let q: f64 = (0..m.len()).map(|a| basis[(i, a)] * m[a]).sum();
                        c[nv + ne * (k - 1) + t * ni + i] += 2.0 * w * fx * q;
                    }
                }
            }
        }
        Ok(ScalarField {
            space: Arc::clone(self),
            coeffs: c,
        })
    }

    pub fn zero_field(self: &Arc<Self>) -> ScalarField {
        ScalarField {
            space: Arc::clone(self),
            coeffs: vec![0.0; self.dim()],
        }
    }

}

/// Solves the reference duality system: row `b` of the result holds the
/// monomial coefficients of the local basis function dual to local
/// functional `b` (with edge moments taken in the local edge direction).
fn reference_dual_basis(k: usize) -> DMatrix<f64> {
    let n = poly::dim_p(k as i32);
    let mut d = DMatrix::<f64>::zeros(n, n);
    let mut row = 0;
    for v in REF_VERTICES {
        let m = poly::monomial_values(k, v[0], v[1]);
        for a in 0..n {
            d[(row, a)] = m[a];
        }
        row += 1;
    }
    let erule = quadrature::edge_rule(2 * k).expect("degree in range");
    for i in 0..3 {
        for j in 0..k - 1 {
            for (p, w) in erule.points.iter().zip(&erule.weights) {
                let x = local_edge_point(i, p[0]);
                let m = poly::monomial_values(k, x[0], x[1]);
                let l = poly::legendre01(k - 2, p[0])[j];
                for a in 0..n {
                    d[(row, a)] += w * l * m[a];
                }
            }
            row += 1;
        }
    }
    if k >= 3 {
        let trule = quadrature::triangle_rule(2 * k).expect("degree in range");
        let basis = poly::orthonormal_triangle_basis(k - 3);
        for i in 0..poly::dim_p(k as i32 - 3) {
            for (p, w) in trule.points.iter().zip(&trule.weights) {
                let m = poly::monomial_values(k, p[0], p[1]);
                let mq = poly::monomial_values(k - 3, p[0], p[1]);
                let q: f64 = (0..mq.len()).map(|a| basis[(i, a)] * mq[a]).sum();
                for a in 0..n {
                    d[(row, a)] += 2.0 * w * q * m[a];
                }
            }
            row += 1;
        }
    }
    debug_assert_eq!(row, n);
    d.transpose()
        .try_inverse()
        .expect("Lagrange degrees of freedom are unisolvent")
}

/// A deflection field `v_h ∈ V_h`.
#[derive(Clone, Debug)]
pub struct ScalarField {
    pub space: Arc<LagrangeSpace>,
    pub coeffs: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: Arc<LagrangeSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                space.dim(),
                coeffs.len()
            )));
        }
        Ok(Self { space, coeffs })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    /// Coefficients of the local (signed) basis of `t`.
    pub fn local_coeffs(&self, t: usize) -> Vec<f64> {
        let (idx, _) = self.space.local_dofs(t);
        idx.iter().map(|&i| self.coeffs[i]).collect()
    }

    /// Value, gradient and Hessian at reference point `xi` of element `t`.
    pub fn eval(&self, t: usize, xi: Point) -> Jet2 {
        let tab = self.space.tabulate(t, &[xi]);
        tab.combine(0, &self.local_coeffs(t))
    }

    /// Evaluations at many reference points of one element.
    pub fn eval_many(&self, t: usize, points: &[Point]) -> Vec<Jet2> {
        let tab = self.space.tabulate(t, points);
        let c = self.local_coeffs(t);
        (0..points.len()).map(|q| tab.combine(q, &c)).collect()
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            space: Arc::clone(&self.space),
            coeffs: self.coeffs.iter().map(|c| s * c).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;
    use crate::spaces::edge_ref_point;

    fn random_mesh() -> Arc<Mesh> {
        let m = Mesh::l_shape(1, &BoundarySpec::clamped()).unwrap();
        let m = m.refine(&[0, 3]).unwrap().mesh;
        Arc::new(m)
    }

    #[test]
    fn dimension_formula() {
        let mesh = random_mesh();
        for k in 2..=4 {
            let s = LagrangeSpace::new(mesh.clone(), k).unwrap();
            assert_eq!(
                s.dim(),
                mesh.num_vertices()
                    + (k - 1) * mesh.num_edges()
                    + poly::dim_p(k as i32 - 3) * mesh.num_triangles()
            );
        }
        assert!(LagrangeSpace::new(mesh, 1).is_err());
    }

    #[test]
    fn global_basis_is_dual_to_functionals() {
        let mesh = random_mesh();
        for k in 2..=4 {
            let space = Arc::new(LagrangeSpace::new(mesh.clone(), k).unwrap());
            // Interpolating a global basis function must return a unit vector.
            for dof in (0..space.dim()).step_by(5) {
                let mut c = vec![0.0; space.dim()];
                c[dof] = 1.0;
                let phi = ScalarField::new(space.clone(), c.clone()).unwrap();
                let locate = |p: Point| -> f64 {
                    for t in 0..mesh.num_triangles() {
                        let xi = mesh.affine(t).to_reference(p);
                        if xi[0] >= -1e-12 && xi[1] >= -1e-12 && xi[0] + xi[1] <= 1.0 + 1e-12 {
                            return phi.eval(t, xi).val;
                        }
                    }
                    panic!("point outside mesh");
                };
                let back = space.interpolate(&locate, 2 * k).unwrap();
                for (i, (a, b)) in back.coeffs.iter().zip(&c).enumerate() {
                    assert!((a - b).abs() < 1e-12, "k={k} dof {dof}: coefficient {i} = {a}");
                }
            }
        }
    }

    #[test]
    fn fields_are_continuous() {
        let mesh = random_mesh();
        let space = Arc::new(LagrangeSpace::new(mesh.clone(), 3).unwrap());
        let c: Vec<f64> = (0..space.dim()).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let f = ScalarField::new(space, c).unwrap();
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(r) = edge.right else { continue };
            for s in [0.0, 0.2, 0.5, 0.9] {
                let a = f.eval(edge.left, edge_ref_point(&mesh, edge.left, e, s)).val;
                let b = f.eval(r, edge_ref_point(&mesh, r, e, s)).val;
                assert!((a - b).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials() {
        let mesh = random_mesh();
        for k in 2..=4 {
            let space = Arc::new(LagrangeSpace::new(mesh.clone(), k).unwrap());
            let p = move |x: Point| (x[0] - 0.3 * x[1]).powi(k as i32) + x[1] * x[0] - 2.0;
            let f = space.interpolate(&p, 2 * k).unwrap();
            for t in 0..mesh.num_triangles() {
                let map = mesh.affine(t);
                for xi in [[0.2, 0.3], [0.6, 0.1]] {
                    let got = f.eval(t, xi).val;
                    assert!((got - p(map.to_physical(xi))).abs() < 1e-12);
                }
            }
            let zero = space.interpolate(&|_| 0.0, 4).unwrap();
            assert!(zero.coeffs.iter().all(|&c| c == 0.0));
        }
    }

    #[test]
    fn derivatives_of_interpolated_quadratic() {
        let mesh = random_mesh();
        let space = Arc::new(LagrangeSpace::new(mesh.clone(), 2).unwrap());
        let f = space.interpolate(&|x| x[0] * x[0] + 3.0 * x[0] * x[1], 4).unwrap();
        for t in 0..mesh.num_triangles() {
            let xi = [0.25, 0.25];
            let x = mesh.affine(t).to_physical(xi);
            let j = f.eval(t, xi);
            assert!((j.grad[0] - (2.0 * x[0] + 3.0 * x[1])).abs() < 1e-11);
            assert!((j.grad[1] - 3.0 * x[0]).abs() < 1e-11);
            assert!((j.hess[0] - 2.0).abs() < 1e-10);
            assert!((j.hess[1] - 3.0).abs() < 1e-10);
            assert!(j.hess[2].abs() < 1e-10);
        }
    }
}
