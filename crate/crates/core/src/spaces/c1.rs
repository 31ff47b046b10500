//! Globally `C^1` Clough-Tocher macro elements.
//!
//! Every triangle is split at its centroid `c` into the cubic pieces
//! `K_i = (c, a_{i+1}, a_{i+2})`; the piece `K_i` contains edge `i`. The full
//! element has twelve degrees of freedom (vertex values, vertex gradients
//! and the normal derivative at each edge midpoint along the global edge
//! normal); the reduced element drops the midpoint values by requiring the
//! normal derivative to be linear along each edge.
//!
//! Boundary conditions are imposed on the degrees of freedom: the value
//! vanishes at vertices of clamped and simply supported edges, the tangential
//! derivative vanishes along those edges and the normal derivative along
//! clamped edges.

use std::sync::Arc;

use nalgebra::DMatrix;

use super::{Jet2, ScalarField, REF_VERTICES};
use crate::error::{Error, Result};
use crate::geometry::{Point, Sym};
use crate::linalg::TripletBuilder;
use crate::mesh::{BcKind, Mesh};
use crate::poly::{self, MonomialValues};
use crate::quadrature;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum C1Variant {
    /// Nine degrees of freedom per element, contains all quadratics.
    ReducedHct,
    /// Twelve degrees of freedom per element, contains all cubics.
    CloughTocher,
}

impl C1Variant {
    /// The recovery space used for deflections of degree `k`.
    pub fn for_degree(k: usize) -> Option<Self> {
        match k {
            2 => Some(C1Variant::ReducedHct),
            3 => Some(C1Variant::CloughTocher),
            _ => None,
        }
    }
}

/// Cubic coefficients of one local basis function on the three pieces.
type PieceCoeffs = [[f64; 10]; 3];

#[derive(Clone, Debug)]
struct C1Element {
    centroid: Point,
    scale: f64,
    /// One entry per raw local degree of freedom.
    basis: Vec<PieceCoeffs>,
}

#[derive(Debug)]
pub struct C1Space {
    mesh: Arc<Mesh>,
    variant: C1Variant,
    elements: Vec<C1Element>,
    /// Raw global dofs: `3v`, `3v+1`, `3v+2` are value and gradient at
    /// vertex `v`; `3 nv + e` is the midpoint normal derivative (full
    /// element only).
    num_raw: usize,
    /// Free parameters as combinations of raw dofs.
    params: Vec<Vec<(usize, f64)>>,
    /// Raw dof -> list of (parameter, weight).
    raw_to_params: Vec<Vec<(usize, f64)>>,
}

impl C1Space {
    pub fn new(mesh: Arc<Mesh>, variant: C1Variant) -> Result<Self> {
        let elements = (0..mesh.num_triangles())
            .map(|t| build_element(&mesh, t, variant))
            .collect::<Result<Vec<_>>>()?;
        let nv = mesh.num_vertices();
        let num_raw = 3 * nv
            + match variant {
                C1Variant::CloughTocher => mesh.num_edges(),
                C1Variant::ReducedHct => 0,
            };

        // Essential conditions per vertex.
        let mut value_fixed = vec![false; nv];
        let mut grad_constraints: Vec<Vec<Point>> = vec![Vec::new(); nv];
        for (e, edge) in mesh.edges().iter().enumerate() {
            let Some(kind) = edge.boundary else { continue };
            let t = mesh.edge_tangent(e);
            let n = mesh.edge_normal(e);
            for &v in &edge.vertices {
                if kind.fixes_deflection() {
                    value_fixed[v] = true;
                    grad_constraints[v].push(t);
                }
                if kind == BcKind::Clamped {
                    grad_constraints[v].push(n);
                }
            }
        }
        let mut params: Vec<Vec<(usize, f64)>> = Vec::new();
        for v in 0..nv {
            if !value_fixed[v] {
                params.push(vec![(3 * v, 1.0)]);
            }
            for d in free_directions(&grad_constraints[v]) {
                params.push(vec![(3 * v + 1, d[0]), (3 * v + 2, d[1])]);
            }
        }
        if variant == C1Variant::CloughTocher {
            for (e, edge) in mesh.edges().iter().enumerate() {
                if edge.boundary != Some(BcKind::Clamped) {
                    params.push(vec![(3 * nv + e, 1.0)]);
                }
            }
        }
        let mut raw_to_params = vec![Vec::new(); num_raw];
        for (p, combo) in params.iter().enumerate() {
            for &(r, w) in combo {
                raw_to_params[r].push((p, w));
            }
        }
        Ok(Self {
            mesh,
            variant,
            elements,
            num_raw,
            params,
            raw_to_params,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn variant(&self) -> C1Variant {
        self.variant
    }

    /// Number of free parameters (dimension of the constrained space).
    pub fn dim(&self) -> usize {
        self.params.len()
    }

    pub fn num_raw(&self) -> usize {
        self.num_raw
    }

    /// Raw global dofs of element `t` in local order.
    fn local_raw(&self, t: usize) -> Vec<usize> {
        let nv = self.mesh.num_vertices();
        let mut out = Vec::with_capacity(12);
        for v in self.mesh.triangle(t) {
            out.extend([3 * v, 3 * v + 1, 3 * v + 2]);
        }
        if self.variant == C1Variant::CloughTocher {
            for e in self.mesh.triangle_edges(t) {
                out.push(3 * nv + e);
            }
        }
        out
    }

    /// Raw dof values of a parameter vector.
    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut raw = vec![0.0; self.num_raw];
        for (p, combo) in self.params.iter().enumerate() {
            for &(r, w) in combo {
                raw[r] += w * x[p];
            }
        }
        raw
    }

    /// Field with the given free parameters.
    pub fn field(self: &Arc<Self>, params: Vec<f64>) -> Result<C1Field> {
        if params.len() != self.dim() {
            return Err(Error::InvalidArgument(format!(
                "expected {} parameters, got {}",
                self.dim(),
                params.len()
            )));
        }
        let raw = self.expand(&params);
        Ok(C1Field {
            space: Arc::clone(self),
            params,
            raw,
        })
    }

    /// Field whose raw degrees of freedom are taken from a function and its
    /// gradient, ignoring boundary conditions.
    pub fn hermite_interpolant(
        self: &Arc<Self>,
        value: &dyn Fn(Point) -> f64,
        grad: &dyn Fn(Point) -> Point,
    ) -> C1Field {
        let nv = self.mesh.num_vertices();
        let mut raw = vec![0.0; self.num_raw];
        for (v, p) in self.mesh.vertices().iter().enumerate() {
            let g = grad(*p);
            raw[3 * v] = value(*p);
            raw[3 * v + 1] = g[0];
            raw[3 * v + 2] = g[1];
        }
        if self.variant == C1Variant::CloughTocher {
            for e in 0..self.mesh.num_edges() {
                let g = grad(self.mesh.edge_point(e, 0.5));
                let n = self.mesh.edge_normal(e);
                raw[3 * nv + e] = g[0] * n[0] + g[1] * n[1];
            }
        }
        C1Field {
            space: Arc::clone(self),
            params: Vec::new(),
            raw,
        }
    }

    /// Evaluates the raw local basis of `t` on piece `piece` at a macro
    /// reference point.
    fn eval_basis(&self, t: usize, piece: usize, xi: Point) -> Vec<Jet2> {
        let el = &self.elements[t];
        let x = self.mesh.affine(t).to_physical(xi);
        let h = el.scale;
        let (sx, sy) = ((x[0] - el.centroid[0]) / h, (x[1] - el.centroid[1]) / h);
        let mut mv = MonomialValues::new(3);
        poly::eval_monomials(3, sx, sy, &mut mv);
        el.basis
            .iter()
            .map(|pc| {
                let c = &pc[piece];
                let mut j = Jet2::default();
                for a in 0..10 {
                    j.val += c[a] * mv.val[a];
                    j.grad[0] += c[a] * mv.dx[a] / h;
                    j.grad[1] += c[a] * mv.dy[a] / h;
                    j.hess[0] += c[a] * mv.dxx[a] / (h * h);
                    j.hess[1] += c[a] * mv.dxy[a] / (h * h);
                    j.hess[2] += c[a] * mv.dyy[a] / (h * h);
                }
                j
            })
            .collect()
    }

    /// `L2` projection of a deflection field onto the constrained space.
    pub fn project(self: &Arc<Self>, u: &ScalarField) -> Result<C1Field> {
        if !Arc::ptr_eq(u.mesh(), &self.mesh) {
            return Err(Error::MeshMismatch);
        }
        let k = u.space.degree();
        self.project_with(k + 3, &|t, pts| {
            u.eval_many(t, pts).into_iter().map(|j| j.val).collect()
        })
    }

    /// `L2` projection of a function onto the constrained space.
    pub fn project_fn(self: &Arc<Self>, f: &dyn Fn(Point) -> f64, quad_degree: usize) -> Result<C1Field> {
        let mesh = Arc::clone(&self.mesh);
        self.project_with(quad_degree, &|t, pts| {
            let map = mesh.affine(t);
            pts.iter().map(|p| f(map.to_physical(*p))).collect()
        })
    }

    fn project_with(
        self: &Arc<Self>,
        quad_degree: usize,
        values: &dyn Fn(usize, &[Point]) -> Vec<f64>,
    ) -> Result<C1Field> {
        let n = self.dim();
        let mut mass = TripletBuilder::new(n);
        let mut rhs = vec![0.0; n];
        let deg = quad_degree.max(6);
        for t in 0..self.mesh.num_triangles() {
            let raw = self.local_raw(t);
            let nb = self.elements[t].basis.len();
            let local_params: Vec<&Vec<(usize, f64)>> =
                raw.iter().map(|&r| &self.raw_to_params[r]).collect();
            let mut m_loc = vec![0.0; nb * nb];
            let mut b_loc = vec![0.0; nb];
            for piece in 0..3 {
                let (pts, wts) = composite_piece_rule(&self.mesh, t, piece, deg)?;
                let fv = values(t, &pts);
                for (q, p) in pts.iter().enumerate() {
                    let phi = self.eval_basis(t, piece, *p);
                    for a in 0..nb {
                        b_loc[a] += wts[q] * fv[q] * phi[a].val;
                        for b in 0..nb {
                            m_loc[a * nb + b] += wts[q] * phi[a].val * phi[b].val;
                        }
                    }
                }
            }
            for a in 0..nb {
                for &(pa, wa) in local_params[a] {
                    rhs[pa] += wa * b_loc[a];
                    for b in 0..nb {
                        for &(pb, wb) in local_params[b] {
                            mass.add(pa, pb, wa * wb * m_loc[a * nb + b]);
                        }
                    }
                }
            }
        }
        let params = if n == 0 {
            Vec::new()
        } else {
            mass.build()?.solve_spd(&rhs)?
        };
        self.field(params)
    }
}

/// Orthonormal basis of the directions orthogonal to all `constraints`.
fn free_directions(constraints: &[Point]) -> Vec<Point> {
    let mut g = [0.0; 3];
    for d in constraints {
        g[0] += d[0] * d[0];
        g[1] += d[0] * d[1];
        g[2] += d[1] * d[1];
    }
    let tr = g[0] + g[2];
    if tr == 0.0 {
        return vec![[1.0, 0.0], [0.0, 1.0]];
    }
    let det = g[0] * g[2] - g[1] * g[1];
    let disc = ((0.5 * (g[0] - g[2])).powi(2) + g[1] * g[1]).sqrt();
    let lmin = 0.5 * tr - disc;
    if lmin > 1e-8 * tr || det > 1e-8 * tr * tr {
        return Vec::new();
    }
    // Eigenvector of the smallest eigenvalue.
    let v = if (g[0] - lmin).abs() > (g[2] - lmin).abs() {
        [-g[1], g[0] - lmin]
    } else {
        [g[2] - lmin, -g[1]]
    };
    let nv = v[0].hypot(v[1]);
    vec![[v[0] / nv, v[1] / nv]]
}

/// Reference points of the macro element and physical weights of a rule on
/// piece `piece`.
pub fn composite_piece_rule(
    mesh: &Mesh,
    t: usize,
    piece: usize,
    degree: usize,
) -> Result<(Vec<Point>, Vec<f64>)> {
    let rule = quadrature::triangle_rule(degree)?;
    let c = [1.0 / 3.0, 1.0 / 3.0];
    let a = REF_VERTICES[(piece + 1) % 3];
    let b = REF_VERTICES[(piece + 2) % 3];
    let scale = 2.0 * mesh.area(t) / 3.0;
    let pts = rule
        .points
        .iter()
        .map(|p| {
            [
                c[0] + p[0] * (a[0] - c[0]) + p[1] * (b[0] - c[0]),
                c[1] + p[0] * (a[1] - c[1]) + p[1] * (b[1] - c[1]),
            ]
        })
        .collect();
    let wts = rule.weights.iter().map(|w| w * scale).collect();
    Ok((pts, wts))
}

/// Piece of the macro element containing a reference point.
pub fn piece_of(xi: Point) -> usize {
    let l = [1.0 - xi[0] - xi[1], xi[0], xi[1]];
    if l[0] <= l[1] && l[0] <= l[2] {
        0
    } else if l[1] <= l[2] {
        1
    } else {
        2
    }
}

fn build_element(mesh: &Mesh, t: usize, variant: C1Variant) -> Result<C1Element> {
    let tri = mesh.triangle(t);
    let a = tri.map(|v| mesh.vertex(v));
    let centroid = mesh.centroid(t);
    let scale = mesh.diameter(t);
    let local = |x: Point| [(x[0] - centroid[0]) / scale, (x[1] - centroid[1]) / scale];
    let mut mv = MonomialValues::new(3);
    let row_vals = |x: Point, mv: &mut MonomialValues| {
        let s = local(x);
        poly::eval_monomials(3, s[0], s[1], mv);
    };

    // 36 smoothness rows + 12 dof rows, 30 unknowns.
    let mut m = DMatrix::<f64>::zeros(48, 30);
    let mut r = 0;
    for j in 0..3 {
        // Interior edge c - a_j is shared by the pieces other than j.
        let (p, q) = ((j + 1) % 3, (j + 2) % 3);
        for s in [0.15, 0.4, 0.65, 0.9] {
            let x = [
                centroid[0] + s * (a[j][0] - centroid[0]),
                centroid[1] + s * (a[j][1] - centroid[1]),
            ];
            row_vals(x, &mut mv);
            for vals in [&mv.val, &mv.dx, &mv.dy] {
                for i in 0..10 {
                    m[(r, 10 * p + i)] = vals[i];
                    m[(r, 10 * q + i)] = -vals[i];
                }
                r += 1;
            }
        }
    }
    debug_assert_eq!(r, 36);
    for v in 0..3 {
        // Vertex a_v lies in piece v+1.
        let piece = (v + 1) % 3;
        row_vals(a[v], &mut mv);
        for i in 0..10 {
            m[(r, 10 * piece + i)] = mv.val[i];
            m[(r + 1, 10 * piece + i)] = mv.dx[i] / scale;
            m[(r + 2, 10 * piece + i)] = mv.dy[i] / scale;
        }
        r += 3;
    }
    let edges = mesh.triangle_edges(t);
    for i in 0..3 {
        let e = edges[i];
        let mid = mesh.edge_point(e, 0.5);
        let n = mesh.edge_normal(e);
        row_vals(mid, &mut mv);
        for c in 0..10 {
            m[(r, 10 * i + c)] = (n[0] * mv.dx[c] + n[1] * mv.dy[c]) / scale;
        }
        r += 1;
    }
    debug_assert_eq!(r, 48);

    let mut rhs = DMatrix::<f64>::zeros(48, 12);
    for d in 0..12 {
        rhs[(36 + d, d)] = 1.0;
    }
    let sol = m
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-10)
        .map_err(|_| Error::SingularLocalSystem { element: t })?;
    if (&m * &sol - &rhs).amax() > 1e-8 {
        return Err(Error::SingularLocalSystem { element: t });
    }
    let basis12: Vec<PieceCoeffs> = (0..12)
        .map(|d| {
            let mut pc = [[0.0; 10]; 3];
            for p in 0..3 {
                for i in 0..10 {
                    pc[p][i] = sol[(10 * p + i, d)];
                }
            }
            pc
        })
        .collect();

    let basis = match variant {
        C1Variant::CloughTocher => basis12,
        C1Variant::ReducedHct => {
            // ∂n(m_E) = ½ (∇u(a) + ∇u(b)) · n_E
            let mut out: Vec<PieceCoeffs> = basis12[..9].to_vec();
            for i in 0..3 {
                let n = mesh.edge_normal(edges[i]);
                for v in [(i + 1) % 3, (i + 2) % 3] {
                    for comp in 0..2 {
                        let w = 0.5 * n[comp];
                        let target = &mut out[3 * v + 1 + comp];
                        for p in 0..3 {
                            for c in 0..10 {
                                target[p][c] += w * basis12[9 + i][p][c];
                            }
                        }
                    }
                }
            }
            out
        }
    };
    Ok(C1Element {
        centroid,
        scale,
        basis,
    })
}

/// A conforming deflection field.
#[derive(Clone, Debug)]
pub struct C1Field {
    pub space: Arc<C1Space>,
    /// Free parameters (empty for fields built from raw dofs).
    pub params: Vec<f64>,
    pub raw: Vec<f64>,
}

impl C1Field {
    pub fn mesh(&self) -> &Arc<Mesh> {
        self.space.mesh()
    }

    /// Evaluates on a given piece (needed on the interfaces between pieces,
    /// where second derivatives jump).
    pub fn eval_piece(&self, t: usize, piece: usize, xi: Point) -> Jet2 {
        let raw = self.space.local_raw(t);
        let phi = self.space.eval_basis(t, piece, xi);
        let mut out = Jet2::default();
        for (j, &r) in phi.iter().zip(&raw) {
            let c = self.raw[r];
            out.val += c * j.val;
            out.grad[0] += c * j.grad[0];
            out.grad[1] += c * j.grad[1];
            for i in 0..3 {
                out.hess[i] += c * j.hess[i];
            }
        }
        out
    }

    pub fn eval(&self, t: usize, xi: Point) -> Jet2 {
        self.eval_piece(t, piece_of(xi), xi)
    }

    pub fn hessian(&self, t: usize, piece: usize, xi: Point) -> Sym {
        self.eval_piece(t, piece, xi).hess
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;
    use crate::spaces::{edge_ref_point, LagrangeSpace};

    fn mesh(spec: &BoundarySpec) -> Arc<Mesh> {
        let m = Mesh::unit_square(2, spec).unwrap().refine(&[0, 5]).unwrap().mesh;
        Arc::new(m)
    }

    #[test]
    fn reproduces_polynomials() {
        let m = mesh(&BoundarySpec::uniform(BcKind::Free));
        for (variant, deg) in [(C1Variant::ReducedHct, 2), (C1Variant::CloughTocher, 3)] {
            let s = Arc::new(C1Space::new(m.clone(), variant).unwrap());
            let f = move |x: Point| (x[0] + 0.5 * x[1]).powi(deg) - x[0] * x[1] + 0.3;
            let g = move |x: Point| {
                let b = (x[0] + 0.5 * x[1]).powi(deg - 1) * deg as f64;
                [b - x[1], 0.5 * b - x[0]]
            };
            let w = s.hermite_interpolant(&f, &g);
            for t in 0..m.num_triangles() {
                for xi in [[0.1, 0.2], [0.7, 0.1], [0.3, 0.6], [1.0 / 3.0, 1.0 / 3.0]] {
                    let x = m.affine(t).to_physical(xi);
                    let j = w.eval(t, xi);
                    assert!((j.val - f(x)).abs() < 1e-11, "{variant:?}");
                    let gx = g(x);
                    assert!((j.grad[0] - gx[0]).abs() < 1e-10);
                    assert!((j.grad[1] - gx[1]).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn random_fields_are_c1() {
        let spec = BoundarySpec::uniform(BcKind::Clamped).with_segment(
            [0.0, 1.0],
            [1.0, 1.0],
            BcKind::Free,
        );
        let m = mesh(&spec);
        for variant in [C1Variant::ReducedHct, C1Variant::CloughTocher] {
            let s = Arc::new(C1Space::new(m.clone(), variant).unwrap());
            let p: Vec<f64> = (0..s.dim()).map(|i| ((i * 53) % 17) as f64 / 8.0 - 1.0).collect();
            let w = s.field(p).unwrap();
            for (e, edge) in m.edges().iter().enumerate() {
                for sp in [0.13, 0.5, 0.77] {
                    let l = w.eval(edge.left, edge_ref_point(&m, edge.left, e, sp));
                    match edge.right {
                        Some(r) => {
                            let rr = w.eval(r, edge_ref_point(&m, r, e, sp));
                            assert!((l.val - rr.val).abs() < 1e-10);
                            assert!((l.grad[0] - rr.grad[0]).abs() < 1e-9);
                            assert!((l.grad[1] - rr.grad[1]).abs() < 1e-9);
                        }
                        None => {
                            let n = m.edge_normal(e);
                            let dn = l.grad[0] * n[0] + l.grad[1] * n[1];
                            match edge.boundary.unwrap() {
                                BcKind::Clamped => {
                                    assert!(l.val.abs() < 1e-10 && dn.abs() < 1e-9)
                                }
                                BcKind::SimplySupported => assert!(l.val.abs() < 1e-10),
                                BcKind::Free => {}
                            }
                        }
                    }
                }
            }
            // Smoothness across the interior edges of the macro element.
            for t in 0..m.num_triangles() {
                for j in 0..3 {
                    let s = 0.37;
                    let c = [1.0 / 3.0, 1.0 / 3.0];
                    let v = REF_VERTICES[j];
                    let xi = [c[0] + s * (v[0] - c[0]), c[1] + s * (v[1] - c[1])];
                    let a = w.eval_piece(t, (j + 1) % 3, xi);
                    let b = w.eval_piece(t, (j + 2) % 3, xi);
                    assert!((a.val - b.val).abs() < 1e-10);
                    assert!((a.grad[0] - b.grad[0]).abs() < 1e-9);
                    assert!((a.grad[1] - b.grad[1]).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn projection_examples() {
        let free = mesh(&BoundarySpec::uniform(BcKind::Free));
        let s = Arc::new(C1Space::new(free.clone(), C1Variant::ReducedHct).unwrap());
        let lag = Arc::new(LagrangeSpace::new(free.clone(), 2).unwrap());
        let q = lag.interpolate(&|x| x[0] * x[0] - 2.0 * x[0] * x[1] + x[1], 4).unwrap();
        let p = s.project(&q).unwrap();
        let mut err = 0.0;
        for t in 0..free.num_triangles() {
            for piece in 0..3 {
                let (pts, wts) = composite_piece_rule(&free, t, piece, 8).unwrap();
                for (x, w) in pts.iter().zip(&wts) {
                    err += w * (p.eval_piece(t, piece, *x).val - q.eval(t, *x).val).powi(2);
                }
            }
        }
        assert!(err.sqrt() < 1e-10, "{}", err.sqrt());

        let clamped = mesh(&BoundarySpec::clamped());
        let s = Arc::new(C1Space::new(clamped.clone(), C1Variant::ReducedHct).unwrap());
        let lag = Arc::new(LagrangeSpace::new(clamped.clone(), 2).unwrap());
        let zero = s.project(&lag.zero_field()).unwrap();
        assert!(zero.params.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn free_directions_cases() {
        assert_eq!(free_directions(&[]).len(), 2);
        assert!(free_directions(&[[1.0, 0.0], [0.0, 1.0]]).is_empty());
        let d = free_directions(&[[0.0, 1.0], [0.0, -1.0]]);
        assert_eq!(d.len(), 1);
        assert!((d[0][0].abs() - 1.0).abs() < 1e-14 && d[0][1].abs() < 1e-14);
    }
}
