//! Hellan-Herrmann-Johnson moment tensors: symmetric matrix fields of degree
//! `k-1` whose normal-normal component is continuous across edges.
//!
//! Degrees of freedom of an element:
//! * `(1/|E|) ∫_E τ_nn L_j ds`, `j = 0..=k-1`, on each edge (global edge
//!   parameter, `τ_nn` does not depend on the sign of `n`),
//! * `(1/|T|) ∫_T τ : (S_c q_m) dx` with `S_0 = e_x⊗e_x`,
//!   `S_1 = e_x⊗e_y + e_y⊗e_x`, `S_2 = e_y⊗e_y` and `q_m` the orthonormal
//!   basis of `P^{k-2}` on the reference element.
//!
//! The normal-normal moments are not affine invariant, so the local dual
//! basis is recomputed for every element.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::local_edge_point;
use crate::error::{Error, Result};
use crate::geometry::{contract, rot90, sub, AffineMap, Point, Sym};
use crate::mesh::Mesh;
use crate::poly::{self, MonomialValues};
use crate::quadrature;

/// Symmetric basis tensors paired with the interior test polynomials.
pub const INTERIOR_TENSORS: [Sym; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

#[derive(Debug)]
pub struct HhjSpace {
    mesh: Arc<Mesh>,
    k: usize,
    constrained: Vec<bool>,
}

/// Value and derivatives of a tensor field at a point.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TensorJet {
    pub val: Sym,
    pub div: Point,
    pub divdiv: f64,
}

/// The local dual basis of one element in physical form.
#[derive(Clone, Debug)]
pub struct HhjElement {
    pub map: AffineMap,
    /// Rows: signed local basis functions; columns: `(component, monomial)`
    /// with component-major layout.
    pub coef: DMatrix<f64>,
    degree: usize,
}

impl HhjElement {
    pub fn nbasis(&self) -> usize {
        self.coef.nrows()
    }

    /// Evaluates every local basis function at a reference point.
    pub fn eval_basis(&self, xi: Point) -> Vec<TensorJet> {
        let d = self.degree;
        let nm = poly::dim_p(d as i32);
        let mut mv = MonomialValues::new(d);
        poly::eval_monomials(d, xi[0], xi[1], &mut mv);
        // Physical first and second derivatives of the monomials.
        let grads: Vec<Point> = (0..nm).map(|a| self.map.grad([mv.dx[a], mv.dy[a]])).collect();
        let hess: Vec<Sym> = (0..nm)
            .map(|a| self.map.hess([mv.dxx[a], mv.dxy[a], mv.dyy[a]]))
            .collect();
        (0..self.nbasis())
            .map(|b| {
                let row = self.coef.row(b);
                let mut out = TensorJet::default();
                for a in 0..nm {
                    let (cxx, cxy, cyy) = (row[a], row[nm + a], row[2 * nm + a]);
                    out.val[0] += cxx * mv.val[a];
                    out.val[1] += cxy * mv.val[a];
                    out.val[2] += cyy * mv.val[a];
                    let g = grads[a];
                    out.div[0] += cxx * g[0] + cxy * g[1];
                    out.div[1] += cxy * g[0] + cyy * g[1];
                    let h = hess[a];
                    out.divdiv += cxx * h[0] + 2.0 * cxy * h[1] + cyy * h[2];
                }
                out
            })
            .collect()
    }

    /// Physical partial derivatives `(∂_x τ, ∂_y τ)` of every local basis
    /// function at a reference point.
    pub fn eval_basis_grad(&self, xi: Point) -> Vec<[Sym; 2]> {
        let d = self.degree;
        let nm = poly::dim_p(d as i32);
        let mut mv = MonomialValues::new(d);
        poly::eval_monomials(d, xi[0], xi[1], &mut mv);
        let grads: Vec<Point> = (0..nm).map(|a| self.map.grad([mv.dx[a], mv.dy[a]])).collect();
        (0..self.nbasis())
            .map(|b| {
                let row = self.coef.row(b);
                let mut out = [[0.0; 3]; 2];
                for (a, g) in grads.iter().enumerate() {
                    for c in 0..3 {
                        let v = row[c * nm + a];
                        out[0][c] += v * g[0];
                        out[1][c] += v * g[1];
                    }
                }
                out
            })
            .collect()
    }

    /// Combination of basis values.
    pub fn combine(basis: &[TensorJet], c: &[f64]) -> TensorJet {
        let mut out = TensorJet::default();
        for (j, &cb) in basis.iter().zip(c) {
            for i in 0..3 {
                out.val[i] += cb * j.val[i];
            }
            out.div[0] += cb * j.div[0];
            out.div[1] += cb * j.div[1];
            out.divdiv += cb * j.divdiv;
        }
        out
    }
}

impl HhjSpace {
    /// Moment tensors of degree `k-1`, paired with deflections of degree `k`.
    pub fn new(mesh: Arc<Mesh>, k: usize) -> Result<Self> {
        if !(2..=6).contains(&k) {
            return Err(Error::InvalidArgument(format!(
                "polynomial degree k = {k} is outside 2..=6"
            )));
        }
        let mut constrained = vec![false; k * mesh.num_edges() + 3 * poly::dim_p(k as i32 - 2) * mesh.num_triangles()];
        for (e, edge) in mesh.edges().iter().enumerate() {
            if edge.boundary.is_some_and(|b| b.fixes_moment()) {
                for j in 0..k {
                    constrained[e * k + j] = true;
                }
            }
        }
        Ok(Self {
            mesh,
            k,
            constrained,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    /// Degree `k` of the associated deflection space; tensors have degree `k-1`.
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.constrained.len()
    }

    /// Edge degrees of freedom fixed by `τ_nn = 0` on simply supported and
    /// free edges.
    pub fn constrained(&self) -> &[bool] {
        &self.constrained
    }

    pub fn num_free(&self) -> usize {
        self.constrained.iter().filter(|&&c| !c).count()
    }

    pub fn local_dim(&self) -> usize {
        3 * poly::dim_p(self.k as i32 - 1)
    }

    pub fn interior_per_element(&self) -> usize {
        poly::dim_p(self.k as i32 - 2)
    }

    /// Global index of edge moment `j` of edge `e`.
    pub fn edge_dof(&self, e: usize, j: usize) -> usize {
        e * self.k + j
    }

    /// Global index of interior moment `(c, m)` of element `t`.
    pub fn interior_dof(&self, t: usize, c: usize, m: usize) -> usize {
        let ni = self.interior_per_element();
        self.k * self.mesh.num_edges() + t * 3 * ni + c * ni + m
    }

    /// Global indices and signs of the local basis of `t`.
    pub fn local_dofs(&self, t: usize) -> (Vec<usize>, Vec<f64>) {
        let n = self.local_dim();
        let mut idx = Vec::with_capacity(n);
        let mut sgn = Vec::with_capacity(n);
        for (i, &e) in self.mesh.triangle_edges(t).iter().enumerate() {
            let left = self.mesh.is_left(t, i);
            for j in 0..self.k {
                idx.push(self.edge_dof(e, j));
                sgn.push(if left || j % 2 == 0 { 1.0 } else { -1.0 });
            }
        }
        for c in 0..3 {
            for m in 0..self.interior_per_element() {
                idx.push(self.interior_dof(t, c, m));
                sgn.push(1.0);
            }
        }
        (idx, sgn)
    }

    /// Local dual basis of element `t`.
    pub fn element(&self, t: usize) -> Result<HhjElement> {
        let k = self.k;
        let d = k - 1;
        let nm = poly::dim_p(d as i32);
        let n = 3 * nm;
        let map = self.mesh.affine(t);
        let tri = self.mesh.triangle(t);
        let mut dmat = DMatrix::<f64>::zeros(n, n);
        let mut row = 0;
        let erule = quadrature::edge_rule(2 * k)?;
        for i in 0..3 {
            let a = self.mesh.vertex(tri[(i + 1) % 3]);
            let b = self.mesh.vertex(tri[(i + 2) % 3]);
            let tvec = sub(b, a);
            let len = tvec[0].hypot(tvec[1]);
            // Outward normal of a counter-clockwise element.
            let r = rot90([tvec[0] / len, tvec[1] / len]);
            let nrm = [-r[0], -r[1]];
            let w_nn = [nrm[0] * nrm[0], 2.0 * nrm[0] * nrm[1], nrm[1] * nrm[1]];
            for j in 0..k {
                for (p, w) in erule.points.iter().zip(&erule.weights) {
                    let x = local_edge_point(i, p[0]);
                    let m = poly::monomial_values(d, x[0], x[1]);
                    let l = poly::legendre01(k - 1, p[0])[j];
                    for c in 0..3 {
                        for a in 0..nm {
                            dmat[(row, c * nm + a)] += w * l * w_nn[c] * m[a];
                        }
                    }
                }
                row += 1;
            }
        }
        let ni = self.interior_per_element();
        let basis = poly::orthonormal_triangle_basis(k - 2);
        let trule = quadrature::triangle_rule(2 * k)?;
        for (c, s) in INTERIOR_TENSORS.iter().enumerate() {
            // τ : S_c picks the coefficient of component c (twice for xy).
            let weight = if c == 1 { 2.0 * s[1] } else { s[c] };
            for mi in 0..ni {
                for (p, w) in trule.points.iter().zip(&trule.weights) {
                    let m = poly::monomial_values(d, p[0], p[1]);
                    let mq = poly::monomial_values(k - 2, p[0], p[1]);
                    let q: f64 = (0..mq.len()).map(|a| basis[(mi, a)] * mq[a]).sum();
                    for a in 0..nm {
                        dmat[(row, c * nm + a)] += 2.0 * w * weight * q * m[a];
                    }
                }
                row += 1;
            }
        }
        debug_assert_eq!(row, n);
        let mut coef = dmat
            .transpose()
            .try_inverse()
            .ok_or(Error::SingularLocalSystem { element: t })?;
        let (_, sgn) = self.local_dofs(t);
        for (b, s) in sgn.iter().enumerate() {
            if *s < 0.0 {
                coef.row_mut(b).neg_mut();
            }
        }
        Ok(HhjElement {
            map,
            coef,
            degree: d,
        })
    }

    pub fn zero_field(self: &Arc<Self>) -> MomentField {
        MomentField {
            space: Arc::clone(self),
            coeffs: vec![0.0; self.dim()],
        }
    }
}

/// A moment tensor field `τ_h ∈ M_h`.
#[derive(Clone, Debug)]
pub struct MomentField {
    pub space: Arc<HhjSpace>,
    pub coeffs: Vec<f64>,
}

impl MomentField {
    pub fn new(space: Arc<HhjSpace>, coeffs: Vec<f64>) -> Result<Self> {
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

    pub fn local_coeffs(&self, t: usize) -> Vec<f64> {
        let (idx, _) = self.space.local_dofs(t);
        idx.iter().map(|&i| self.coeffs[i]).collect()
    }

    pub fn eval(&self, t: usize, xi: Point) -> Result<TensorJet> {
        let el = self.space.element(t)?;
        Ok(HhjElement::combine(&el.eval_basis(xi), &self.local_coeffs(t)))
    }

    /// Evaluations at several reference points of one element.
    pub fn eval_many(&self, t: usize, points: &[Point]) -> Result<Vec<TensorJet>> {
        let el = self.space.element(t)?;
        let c = self.local_coeffs(t);
        Ok(points
            .iter()
            .map(|p| HhjElement::combine(&el.eval_basis(*p), &c))
            .collect())
    }

    /// `τ_nn` on edge `e` seen from element `t` at global edge parameter `s`.
    pub fn nn_trace(&self, t: usize, e: usize, s: f64) -> Result<f64> {
        let xi = super::edge_ref_point(self.mesh(), t, e, s);
        let n = self.mesh().edge_normal(e);
        Ok(contract(&self.eval(t, xi)?.val, n, n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BcKind, BoundarySpec};
    use proptest::prelude::*;

    fn mesh() -> Arc<Mesh> {
        let spec = BoundarySpec::uniform(BcKind::Clamped).with_segment(
            [-1.0, 1.0],
            [1.0, 1.0],
            BcKind::Free,
        );
        let m = Mesh::l_shape(1, &spec).unwrap().refine(&[1, 4]).unwrap().mesh;
        Arc::new(m)
    }

    #[test]
    fn dimension_and_constraints() {
        let m = mesh();
        for k in 2..=4 {
            let s = HhjSpace::new(m.clone(), k).unwrap();
            assert_eq!(
                s.dim(),
                k * m.num_edges() + 3 * poly::dim_p(k as i32 - 2) * m.num_triangles()
            );
            let free_edges = m
                .edges()
                .iter()
                .filter(|e| e.boundary == Some(BcKind::Free))
                .count();
            assert!(free_edges > 0);
            assert_eq!(s.dim() - s.num_free(), k * free_edges);
        }
    }

    #[test]
    fn local_basis_is_dual() {
        let m = mesh();
        for k in 2..=4 {
            let s = HhjSpace::new(m.clone(), k).unwrap();
            for t in [0, 3, m.num_triangles() - 1] {
                let el = s.element(t).unwrap();
                // Apply the (global-orientation) functionals to each basis function.
                let erule = quadrature::edge_rule(2 * k).unwrap();
                for b in 0..el.nbasis() {
                    let mut row = 0;
                    for (i, &e) in m.triangle_edges(t).iter().enumerate() {
                        let n = m.edge_normal(e);
                        for j in 0..k {
                            let mut v = 0.0;
                            for (p, w) in erule.points.iter().zip(&erule.weights) {
                                let xi = crate::spaces::edge_ref_point(&m, t, e, p[0]);
                                let tau = el.eval_basis(xi)[b].val;
                                v += w * contract(&tau, n, n) * poly::legendre01(k - 1, p[0])[j];
                            }
                            let expect = if row == b { 1.0 } else { 0.0 };
                            assert!((v - expect).abs() < 1e-11, "k={k} t={t} b={b} edge {i} j={j}: {v}");
                            row += 1;
                        }
                    }
                    let basis = poly::orthonormal_triangle_basis(k - 2);
                    let trule = quadrature::triangle_rule(2 * k).unwrap();
                    for sc in INTERIOR_TENSORS {
                        for mi in 0..s.interior_per_element() {
                            let mut v = 0.0;
                            for (p, w) in trule.points.iter().zip(&trule.weights) {
                                let mq = poly::monomial_values(k - 2, p[0], p[1]);
                                let q: f64 = (0..mq.len()).map(|a| basis[(mi, a)] * mq[a]).sum();
                                v += 2.0 * w * crate::geometry::ddot(&el.eval_basis(*p)[b].val, &sc) * q;
                            }
                            let expect = if row == b { 1.0 } else { 0.0 };
                            assert!((v - expect).abs() < 1e-11, "k={k} t={t} b={b} interior: {v}");
                            row += 1;
                        }
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn nn_trace_is_continuous(seed in 0u64..1000, k in 2usize..=4) {
            let m = mesh();
            let s = Arc::new(HhjSpace::new(m.clone(), k).unwrap());
            let c: Vec<f64> = (0..s.dim())
                .map(|i| (((i as u64 + 1) * 2654435761 + seed * 97) % 1000) as f64 / 500.0 - 1.0)
                .collect();
            let f = MomentField::new(s, c).unwrap();
            for (e, edge) in m.edges().iter().enumerate() {
                let Some(r) = edge.right else { continue };
                for sp in [0.1, 0.47, 0.8] {
                    let a = f.nn_trace(edge.left, e, sp).unwrap();
                    let b = f.nn_trace(r, e, sp).unwrap();
                    prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
                }
            }
        }
    }
}
