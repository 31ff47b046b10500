//! The distributional `div div` of piecewise polynomial moment tensors and
//! the local construction of an equilibrated moment tensor from a `C^0`
//! interior penalty solution.
//!
//! For `τ ∈ M_h` and a continuous, piecewise smooth `v` vanishing on the
//! clamped and simply supported boundary, three equivalent expressions of
//! `⟨div div τ, v⟩` are provided:
//!
//! * jump form: `Σ_T ∫_T τ:∇²v - Σ_E ∫_E τ_nn [∂n v]` over interior and
//!   clamped edges,
//! * divergence form: `-Σ_T ∫_T div τ·∇v + Σ_E ∫_E [τ_nt] ∂_t v` over
//!   interior and free edges,
//! * load form: `Σ_V f^V v(V) + Σ_E ∫_E f^E v + Σ_T ∫_T f^T v` with
//!   `f^T = div div τ`, `f^E = -∂_t[τ_nt] - [div τ·n]` and
//!   `f^V = Σ_{E∋V} δ(E,V) [τ_nt](V)`, where `δ(E,V) = +1` at the end point
//!   `V2` and `-1` at the start point `V1` of `E`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{contract, ddot, dot, Point, Sym};
use crate::ipdg::{is_dg_edge, load_vector, EdgeTraces};
use crate::mesh::{BcKind, Mesh};
use crate::poly;
use crate::problem::{ElementRule, Load};
use crate::quadrature;
use crate::spaces::hhj::INTERIOR_TENSORS;
use crate::spaces::{
    composite_piece_rule, edge_ref_point, C1Field, HhjElement, Jet2, LagrangeSpace, MomentField, PiecewisePolynomial,
    ScalarField, REF_VERTICES,
};

/// A continuous, piecewise smooth test function `v`.
pub trait Deflection {
    fn mesh(&self) -> &Arc<Mesh>;

    /// Value and derivatives on element `t` at reference point `xi`.
    fn jet(&self, t: usize, xi: Point) -> Jet2;

    /// Rule on `t` integrating `v` against polynomials of degree `deg`.
    fn element_rule(&self, t: usize, deg: usize) -> Result<ElementRule>;

    /// Polynomial degree on edges (for edge quadrature).
    fn edge_degree(&self) -> usize;

    /// Errors unless `v` vanishes on the clamped and simply supported
    /// boundary.
    fn check_admissible(&self) -> Result<()>;
}

impl Deflection for ScalarField {
    fn mesh(&self) -> &Arc<Mesh> {
        ScalarField::mesh(self)
    }

    fn jet(&self, t: usize, xi: Point) -> Jet2 {
        self.eval(t, xi)
    }

    fn element_rule(&self, t: usize, deg: usize) -> Result<ElementRule> {
        crate::problem::element_rule(ScalarField::mesh(self), t, deg + self.space.degree(), None, 0)
    }

    fn edge_degree(&self) -> usize {
        self.space.degree()
    }

    fn check_admissible(&self) -> Result<()> {
        let bad = self
            .space
            .constrained()
            .iter()
            .zip(&self.coeffs)
            .position(|(&c, &x)| c && x != 0.0);
        match bad {
            Some(i) => Err(Error::NotAdmissible(format!(
                "deflection dof {i} is constrained by the boundary conditions but equals {}",
                self.coeffs[i]
            ))),
            None => Ok(()),
        }
    }
}

impl Deflection for C1Field {
    fn mesh(&self) -> &Arc<Mesh> {
        C1Field::mesh(self)
    }

    fn jet(&self, t: usize, xi: Point) -> Jet2 {
        self.eval(t, xi)
    }

    fn element_rule(&self, t: usize, deg: usize) -> Result<ElementRule> {
        let mut out = ElementRule::default();
        for piece in 0..3 {
            let (p, w) = composite_piece_rule(C1Field::mesh(self), t, piece, deg + 3)?;
            out.points.extend(p);
            out.weights.extend(w);
        }
        Ok(out)
    }

    fn edge_degree(&self) -> usize {
        3
    }

    fn check_admissible(&self) -> Result<()> {
        // The boundary conditions are built into the space.
        Ok(())
    }
}

fn check_moments(tau: &MomentField) -> Result<()> {
    let bad = tau
        .space
        .constrained()
        .iter()
        .zip(&tau.coeffs)
        .position(|(&c, &x)| c && x != 0.0);
    match bad {
        Some(i) => Err(Error::NotAdmissible(format!(
            "moment dof {i} is constrained by the boundary conditions but equals {}",
            tau.coeffs[i]
        ))),
        None => Ok(()),
    }
}

fn check_pair(tau: &MomentField, v: &dyn Deflection) -> Result<()> {
    if !Arc::ptr_eq(tau.mesh(), v.mesh()) {
        return Err(Error::MeshMismatch);
    }
    check_moments(tau)?;
    v.check_admissible()
}

/// Edges on which the divergence and load forms carry terms: interior and
/// free edges.
fn is_free_edge(mesh: &Mesh, e: usize) -> bool {
    match mesh.edge(e).boundary {
        None => true,
        Some(kind) => kind == BcKind::Free,
    }
}

/// Elements adjacent to edge `e` with the sign of their contribution to a
/// jump across `e`.
fn sides(mesh: &Mesh, e: usize) -> Vec<(usize, f64)> {
    let edge = mesh.edge(e);
    match edge.right {
        Some(r) => vec![(edge.left, 1.0), (r, -1.0)],
        None => vec![(edge.left, 1.0)],
    }
}

/// Local dual bases of all elements.
fn elements(tau: &MomentField) -> Result<Vec<HhjElement>> {
    (0..tau.mesh().num_triangles()).map(|t| tau.space.element(t)).collect()
}

/// Jump form `Σ_T ∫_T τ:∇²v - Σ_E ∫_E τ_nn [∂n v]`.
pub fn pairing_jump(tau: &MomentField, v: &dyn Deflection) -> Result<f64> {
    check_pair(tau, v)?;
    let mesh = tau.mesh();
    let k = tau.space.k();
    let els = elements(tau)?;
    let mut total = 0.0;
    for (t, el) in els.iter().enumerate() {
        let c = tau.local_coeffs(t);
        let rule = v.element_rule(t, k)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let s = HhjElement::combine(&el.eval_basis(*p), &c);
            total += w * ddot(&s.val, &v.jet(t, *p).hess);
        }
    }
    let erule = quadrature::edge_rule(k - 1 + v.edge_degree())?;
    for e in 0..mesh.num_edges() {
        if !is_dg_edge(mesh, e) {
            continue;
        }
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let left = mesh.edge(e).left;
        let cl = tau.local_coeffs(left);
        for (p, w) in erule.points.iter().zip(&erule.weights) {
            let xl = edge_ref_point(mesh, left, e, p[0]);
            let nn = contract(&HhjElement::combine(&els[left].eval_basis(xl), &cl).val, n, n);
            let mut jump = 0.0;
            for (t, sign) in sides(mesh, e) {
                let g = v.jet(t, edge_ref_point(mesh, t, e, p[0])).grad;
                jump += sign * dot(g, n);
            }
            total -= w * len * nn * jump;
        }
    }
    Ok(total)
}

/// Divergence form `-Σ_T ∫_T div τ·∇v + Σ_E ∫_E [τ_nt] ∂_t v`.
pub fn pairing_div(tau: &MomentField, v: &dyn Deflection) -> Result<f64> {
    check_pair(tau, v)?;
    let mesh = tau.mesh();
    let k = tau.space.k();
    let els = elements(tau)?;
    let mut total = 0.0;
    for (t, el) in els.iter().enumerate() {
        let c = tau.local_coeffs(t);
        let rule = v.element_rule(t, k)?;
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let s = HhjElement::combine(&el.eval_basis(*p), &c);
            total -= w * dot(s.div, v.jet(t, *p).grad);
        }
    }
    let erule = quadrature::edge_rule(k - 1 + v.edge_degree())?;
    for e in 0..mesh.num_edges() {
        if !is_free_edge(mesh, e) {
            continue;
        }
        let n = mesh.edge_normal(e);
        let tg = mesh.edge_tangent(e);
        let len = mesh.edge_length(e);
        let left = mesh.edge(e).left;
        for (p, w) in erule.points.iter().zip(&erule.weights) {
            let mut jump = 0.0;
            for (t, sign) in sides(mesh, e) {
                let xi = edge_ref_point(mesh, t, e, p[0]);
                let s = HhjElement::combine(&els[t].eval_basis(xi), &tau.local_coeffs(t));
                jump += sign * contract(&s.val, n, tg);
            }
            let dt = dot(v.jet(left, edge_ref_point(mesh, left, e, p[0])).grad, tg);
            total += w * len * jump * dt;
        }
    }
    Ok(total)
}

/// Pointwise densities of the load form on one element.
fn element_density(el: &HhjElement, c: &[f64], xi: Point) -> f64 {
    HhjElement::combine(&el.eval_basis(xi), c).divdiv
}

/// `f^E = -∂_t[τ_nt] - [div τ·n]` at global parameter `s` of edge `e`.
fn edge_density(mesh: &Mesh, els: &[HhjElement], tau: &MomentField, e: usize, s: f64) -> f64 {
    let n = mesh.edge_normal(e);
    let tg = mesh.edge_tangent(e);
    let mut out = 0.0;
    for (t, sign) in sides(mesh, e) {
        let xi = edge_ref_point(mesh, t, e, s);
        let c = tau.local_coeffs(t);
        let val = HhjElement::combine(&els[t].eval_basis(xi), &c);
        let grads = els[t].eval_basis_grad(xi);
        let mut dtau: Sym = [0.0; 3];
        for (g, &cb) in grads.iter().zip(&c) {
            for i in 0..3 {
                dtau[i] += cb * (tg[0] * g[0][i] + tg[1] * g[1][i]);
            }
        }
        out -= sign * (contract(&dtau, n, tg) + dot(val.div, n));
    }
    out
}

/// `[τ_nt]` of edge `e` at its end point `end` (0 for `V1`, 1 for `V2`).
fn nt_jump_at(mesh: &Mesh, els: &[HhjElement], tau: &MomentField, e: usize, end: usize) -> f64 {
    let n = mesh.edge_normal(e);
    let tg = mesh.edge_tangent(e);
    sides(mesh, e)
        .into_iter()
        .map(|(t, sign)| {
            let xi = edge_ref_point(mesh, t, e, end as f64);
            let s = HhjElement::combine(&els[t].eval_basis(xi), &tau.local_coeffs(t));
            sign * contract(&s.val, n, tg)
        })
        .sum()
}

/// Point charges `f^V`, zero at vertices where the deflection is fixed.
fn vertex_charges(mesh: &Mesh, els: &[HhjElement], tau: &MomentField) -> Vec<f64> {
    let fixed = mesh.deflection_fixed_vertices();
    let mut out = vec![0.0; mesh.num_vertices()];
    for e in 0..mesh.num_edges() {
        if !is_free_edge(mesh, e) {
            continue;
        }
        let [v1, v2] = mesh.edge(e).vertices;
        if !fixed[v2] {
            out[v2] += nt_jump_at(mesh, els, tau, e, 1);
        }
        if !fixed[v1] {
            out[v1] -= nt_jump_at(mesh, els, tau, e, 0);
        }
    }
    out
}

/// An element of each vertex together with the local index of the vertex.
fn vertex_owners(mesh: &Mesh) -> Vec<(usize, usize)> {
    let mut out = vec![(usize::MAX, 0); mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for (i, &v) in tri.iter().enumerate() {
            if out[v].0 == usize::MAX {
                out[v] = (t, i);
            }
        }
    }
    out
}

fn vertex_values(v: &dyn Deflection) -> Vec<f64> {
    vertex_owners(v.mesh())
        .into_iter()
        .map(|(t, i)| v.jet(t, REF_VERTICES[i]).val)
        .collect()
}

/// Load form with densities evaluated pointwise from `τ`.
pub fn pairing_vertexform(tau: &MomentField, v: &dyn Deflection) -> Result<f64> {
    check_pair(tau, v)?;
    let mesh = tau.mesh();
    let k = tau.space.k();
    let els = elements(tau)?;
    let charges = vertex_charges(mesh, &els, tau);
    let mut total: f64 = charges.iter().zip(vertex_values(v)).map(|(q, x)| q * x).sum();
    let erule = quadrature::edge_rule(k - 2 + v.edge_degree())?;
    for e in 0..mesh.num_edges() {
        if !is_free_edge(mesh, e) {
            continue;
        }
        let len = mesh.edge_length(e);
        let left = mesh.edge(e).left;
        for (p, w) in erule.points.iter().zip(&erule.weights) {
            let val = v.jet(left, edge_ref_point(mesh, left, e, p[0])).val;
            total += w * len * edge_density(mesh, &els, tau, e, p[0]) * val;
        }
    }
    if k >= 3 {
        for (t, el) in els.iter().enumerate() {
            let c = tau.local_coeffs(t);
            let rule = v.element_rule(t, k)?;
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                total += w * element_density(el, &c, *p) * v.jet(t, *p).val;
            }
        }
    }
    Ok(total)
}

/// `div div τ` as a functional on deflections: point charges at interior and
/// free vertices, polynomial line densities on interior and free edges and
/// polynomial area densities.
#[derive(Clone, Debug)]
pub struct DistributionalLoad {
    pub mesh: Arc<Mesh>,
    /// `f^V` per mesh vertex (zero where the deflection is fixed).
    pub vertex: Vec<f64>,
    /// `f^E` per edge as coefficients of orthonormal Legendre polynomials in
    /// the global edge parameter; empty on clamped and simply supported edges.
    pub edge: Vec<Vec<f64>>,
    /// `f^T` of degree `k-3`.
    pub element: PiecewisePolynomial,
    /// Largest pointwise deviation of the fitted densities from the exact
    /// ones (zero up to rounding when the degrees are right).
    pub fit_remainder: f64,
}

impl DistributionalLoad {
    /// `Σ_V f^V v(V) + Σ_E ∫_E f^E v + Σ_T ∫_T f^T v`.
    pub fn action(&self, v: &dyn Deflection) -> Result<f64> {
        if !Arc::ptr_eq(&self.mesh, v.mesh()) {
            return Err(Error::MeshMismatch);
        }
        v.check_admissible()?;
        let mesh = &self.mesh;
        let mut total: f64 = self.vertex.iter().zip(vertex_values(v)).map(|(q, x)| q * x).sum();
        let ne = self.edge.iter().map(Vec::len).max().unwrap_or(0);
        let erule = quadrature::edge_rule(ne + v.edge_degree())?;
        for (e, c) in self.edge.iter().enumerate() {
            if c.is_empty() {
                continue;
            }
            let len = mesh.edge_length(e);
            let left = mesh.edge(e).left;
            for (p, w) in erule.points.iter().zip(&erule.weights) {
                let l = poly::legendre01(c.len() - 1, p[0]);
                let f: f64 = c.iter().zip(&l).map(|(a, b)| a * b).sum();
                total += w * len * f * v.jet(left, edge_ref_point(mesh, left, e, p[0])).val;
            }
        }
        if self.element.degree >= 0 {
            let d = self.element.degree as usize;
            for t in 0..mesh.num_triangles() {
                let rule = v.element_rule(t, d)?;
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    total += w * self.element.eval(t, *p) * v.jet(t, *p).val;
                }
            }
        }
        Ok(total)
    }
}

/// Element, edge and vertex densities of `div div τ`.
pub fn distributional_load(tau: &MomentField) -> Result<DistributionalLoad> {
    check_moments(tau)?;
    let mesh = Arc::clone(tau.mesh());
    let k = tau.space.k();
    let els = elements(tau)?;
    let vertex = vertex_charges(&mesh, &els, tau);
    let mut remainder = 0.0f64;

    let erule = quadrature::edge_rule(2 * k)?;
    let mut edge = vec![Vec::new(); mesh.num_edges()];
    for (e, out) in edge.iter_mut().enumerate() {
        if !is_free_edge(&mesh, e) {
            continue;
        }
        let vals: Vec<f64> = erule
            .points
            .iter()
            .map(|p| edge_density(&mesh, &els, tau, e, p[0]))
            .collect();
        let mut c = vec![0.0; k - 1];
        for ((p, w), f) in erule.points.iter().zip(&erule.weights).zip(&vals) {
            for (j, l) in poly::legendre01(k - 2, p[0]).iter().enumerate() {
                c[j] += w * f * l;
            }
        }
        for (p, f) in erule.points.iter().zip(&vals) {
            let l = poly::legendre01(k - 2, p[0]);
            let fit: f64 = c.iter().zip(&l).map(|(a, b)| a * b).sum();
            remainder = remainder.max((fit - f).abs());
        }
        *out = c;
    }

    let deg = k as i32 - 3;
    let element = if deg < 0 {
        // div div of a piecewise linear tensor vanishes.
        for (t, el) in els.iter().enumerate() {
            let c = tau.local_coeffs(t);
            for p in &quadrature::triangle_rule(2)?.points {
                remainder = remainder.max(element_density(el, &c, *p).abs());
            }
        }
        PiecewisePolynomial {
            degree: deg,
            coeffs: vec![Vec::new(); mesh.num_triangles()],
        }
    } else {
        let d = deg as usize;
        let basis = poly::orthonormal_triangle_basis(d);
        let rule = quadrature::triangle_rule(2 * k)?;
        let coeffs: Vec<Vec<f64>> = els
            .iter()
            .enumerate()
            .map(|(t, el)| {
                let c = tau.local_coeffs(t);
                let mut out = vec![0.0; basis.nrows()];
                for (p, w) in rule.points.iter().zip(&rule.weights) {
                    let f = element_density(el, &c, *p);
                    let m = poly::monomial_values(d, p[0], p[1]);
                    for (i, o) in out.iter_mut().enumerate() {
                        let q: f64 = (0..m.len()).map(|a| basis[(i, a)] * m[a]).sum();
                        *o += 2.0 * w * f * q;
                    }
                }
                out
            })
            .collect();
        let pp = PiecewisePolynomial { degree: deg, coeffs };
        for (t, el) in els.iter().enumerate() {
            let c = tau.local_coeffs(t);
            for p in &rule.points {
                remainder = remainder.max((pp.eval(t, *p) - element_density(el, &c, *p)).abs());
            }
        }
        pp
    };
    Ok(DistributionalLoad {
        mesh,
        vertex,
        edge,
        element,
        fit_remainder: remainder,
    })
}

/// `⟨div div τ, φ_i⟩` (jump form) for every basis function of `space`.
pub fn pairing_vector(tau: &MomentField, space: &LagrangeSpace) -> Result<Vec<f64>> {
    if !Arc::ptr_eq(tau.mesh(), space.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let mesh = tau.mesh();
    let k = space.degree();
    let mut out = vec![0.0; space.dim()];
    let rule = quadrature::triangle_rule(2 * k)?;
    let els = elements(tau)?;
    for (t, el) in els.iter().enumerate() {
        let c = tau.local_coeffs(t);
        let (idx, _) = space.local_dofs(t);
        let tab = space.tabulate(t, &rule.points);
        let scale = 2.0 * mesh.area(t);
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let s = HhjElement::combine(&el.eval_basis(*p), &c);
            for (b, &i) in idx.iter().enumerate() {
                out[i] += w * scale * ddot(&s.val, &tab.at(q, b).hess);
            }
        }
    }
    let erule = quadrature::edge_rule(2 * k)?;
    let params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
    for e in 0..mesh.num_edges() {
        if !is_dg_edge(mesh, e) {
            continue;
        }
        let n = mesh.edge_normal(e);
        let len = mesh.edge_length(e);
        let left = mesh.edge(e).left;
        let cl = tau.local_coeffs(left);
        let tr = EdgeTraces::new(space, e, &params);
        for (q, w) in erule.weights.iter().enumerate() {
            let xl = edge_ref_point(mesh, left, e, params[q]);
            let nn = contract(&HhjElement::combine(&els[left].eval_basis(xl), &cl).val, n, n);
            for (b, &i) in tr.dofs.iter().enumerate() {
                out[i] -= w * len * nn * tr.jump[q][b];
            }
        }
    }
    Ok(out)
}

/// Largest defect `|⟨div div τ, φ_i⟩ - (f, φ_i)|` over the basis functions of
/// `V_h^0` (degree `k` of `τ`'s space) and the dof attaining it.
pub fn equilibrium_defect(tau: &MomentField, load: &Load) -> Result<(f64, usize)> {
    let space = LagrangeSpace::new(Arc::clone(tau.mesh()), tau.space.k())?;
    let pv = pairing_vector(tau, &space)?;
    let b = load_vector(&space, load)?;
    let mut worst = (0.0, 0);
    for i in 0..space.dim() {
        if space.constrained()[i] {
            continue;
        }
        let d = (pv[i] - b[i]).abs();
        if d > worst.0 {
            worst = (d, i);
        }
    }
    Ok(worst)
}

/// Tolerance of the equilibration check, `1e-9 (1 + ‖f‖_0)`.
pub fn equilibrium_tolerance(mesh: &Mesh, load: &Load, k: usize) -> Result<f64> {
    Ok(1e-9 * (1.0 + load.l2_norm(mesh, k)?))
}

/// Errors unless `τ` is equilibrated with respect to `f` on `V_h^0`.
pub fn check_equilibrium(tau: &MomentField, load: &Load) -> Result<()> {
    let (worst, dof) = equilibrium_defect(tau, load)?;
    let tolerance = equilibrium_tolerance(tau.mesh(), load, tau.space.k())?;
    if worst > tolerance {
        return Err(Error::EquilibrationResidual { worst, dof, tolerance });
    }
    Ok(())
}

/// Moment tensor of `M_h` (degree `k-1`) built from the interior penalty
/// solution `u_h` without solving a global problem:
///
/// * on interior and clamped edges `σ_nn = {∂nn u_h} - α/h_E [∂n u_h]`,
///   on simply supported and free edges `σ_nn = 0`,
/// * `∫_T σ:q = ∫_T ∇²u_h:q - Σ_E γ_E ∫_E [∂n u_h] q_nn` for symmetric
///   tensors `q` of degree `k-2`, summed over the interior (`γ_E = 1/2`)
///   and clamped (`γ_E = 1`) edges of `T`.
///
/// The result is checked for equilibrium against `load`.
pub fn equilibrate(u_h: &ScalarField, alpha: f64, load: &Load) -> Result<MomentField> {
    let sigma = equilibrate_unchecked(u_h, alpha)?;
    check_equilibrium(&sigma, load)?;
    Ok(sigma)
}

/// The construction of [`equilibrate`] without the equilibrium check.
pub fn equilibrate_unchecked(u_h: &ScalarField, alpha: f64) -> Result<MomentField> {
    let mesh = u_h.mesh();
    let space = &u_h.space;
    let k = space.degree();
    let moments = Arc::new(crate::spaces::HhjSpace::new(Arc::clone(mesh), k)?);
    let mut coeffs = vec![0.0; moments.dim()];

    let erule = quadrature::edge_rule(2 * k)?;
    let params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
    let mut jumps = vec![Vec::new(); mesh.num_edges()];
    for e in 0..mesh.num_edges() {
        if !is_dg_edge(mesh, e) {
            continue;
        }
        let h = mesh.edge_length(e);
        let tr = EdgeTraces::new(space, e, &params);
        let mut jv = Vec::with_capacity(params.len());
        for (q, w) in erule.weights.iter().enumerate() {
            let (j, a) = tr.combine(q, &u_h.coeffs);
            let nn = a - alpha / h * j;
            for (m, l) in poly::legendre01(k - 1, params[q]).iter().enumerate() {
                coeffs[moments.edge_dof(e, m)] += w * nn * l;
            }
            jv.push(j);
        }
        jumps[e] = jv;
    }

    let ni = moments.interior_per_element();
    let basis = poly::orthonormal_triangle_basis(k - 2);
    let q_at = |p: Point| -> Vec<f64> {
        let m = poly::monomial_values(k - 2, p[0], p[1]);
        (0..ni).map(|i| (0..m.len()).map(|a| basis[(i, a)] * m[a]).sum()).collect()
    };
    let trule = quadrature::triangle_rule(2 * k)?;
    for t in 0..mesh.num_triangles() {
        let area = mesh.area(t);
        let hs = u_h.eval_many(t, &trule.points);
        let mut mom = vec![0.0; 3 * ni];
        for ((p, w), j) in trule.points.iter().zip(&trule.weights).zip(&hs) {
            let q = q_at(*p);
            for (c, s) in INTERIOR_TENSORS.iter().enumerate() {
                let hs_c = ddot(&j.hess, s);
                for (m, qm) in q.iter().enumerate() {
                    mom[c * ni + m] += 2.0 * area * w * hs_c * qm;
                }
            }
        }
        for e in mesh.triangle_edges(t) {
            if jumps[e].is_empty() {
                continue;
            }
            let gamma = if mesh.edge(e).is_interior() { 0.5 } else { 1.0 };
            let n = mesh.edge_normal(e);
            let len = mesh.edge_length(e);
            for (qi, w) in erule.weights.iter().enumerate() {
                let q = q_at(edge_ref_point(mesh, t, e, params[qi]));
                for (c, s) in INTERIOR_TENSORS.iter().enumerate() {
                    let snn = contract(s, n, n);
                    for (m, qm) in q.iter().enumerate() {
                        mom[c * ni + m] -= gamma * w * len * jumps[e][qi] * snn * qm;
                    }
                }
            }
        }
        for c in 0..3 {
            for m in 0..ni {
                coeffs[moments.interior_dof(t, c, m)] = mom[c * ni + m] / area;
            }
        }
    }
    MomentField::new(moments, coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ipdg::{self, IpdgProblem};
    use crate::mesh::BoundarySpec;

    fn mixed_spec() -> BoundarySpec {
        BoundarySpec::uniform(BcKind::SimplySupported)
            .with_segment([0.0, 0.0], [1.0, 0.0], BcKind::Clamped)
            .with_segment([0.0, 1.0], [1.0, 1.0], BcKind::Free)
    }

    fn pseudo_random(n: usize, seed: usize) -> Vec<f64> {
        (0..n)
            .map(|i| {
                let x = ((i + 1) * 2654435761 + seed * 40503) % 1000003;
                x as f64 / 500001.5 - 1.0
            })
            .collect()
    }

    fn random_moment(space: &Arc<crate::spaces::HhjSpace>, seed: usize) -> MomentField {
        let mut c = pseudo_random(space.dim(), seed);
        for (x, &fixed) in c.iter_mut().zip(space.constrained()) {
            if fixed {
                *x = 0.0;
            }
        }
        MomentField::new(Arc::clone(space), c).unwrap()
    }

    fn random_deflection(space: &Arc<LagrangeSpace>, seed: usize) -> ScalarField {
        let mut c = pseudo_random(space.dim(), seed + 17);
        for (x, &fixed) in c.iter_mut().zip(space.constrained()) {
            if fixed {
                *x = 0.0;
            }
        }
        ScalarField::new(Arc::clone(space), c).unwrap()
    }

    #[test]
    fn constant_tensor_has_no_load() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let hs = Arc::new(crate::spaces::HhjSpace::new(mesh.clone(), 2).unwrap());
        // Interpolate τ = [[1, 0.5], [0.5, 2]] through its moments.
        let tau_c: Sym = [1.0, 0.5, 2.0];
        let mut c = vec![0.0; hs.dim()];
        for e in 0..mesh.num_edges() {
            let n = mesh.edge_normal(e);
            c[hs.edge_dof(e, 0)] = contract(&tau_c, n, n);
        }
        let basis = poly::orthonormal_triangle_basis(0);
        for t in 0..mesh.num_triangles() {
            for (i, s) in INTERIOR_TENSORS.iter().enumerate() {
                c[hs.interior_dof(t, i, 0)] = ddot(&tau_c, s) * basis[(0, 0)];
            }
        }
        let tau = MomentField::new(hs, c).unwrap();
        let ls = Arc::new(LagrangeSpace::new(mesh.clone(), 2).unwrap());
        let v = random_deflection(&ls, 3);
        assert!(pairing_jump(&tau, &v).unwrap().abs() < 1e-11);
        assert!(pairing_vertexform(&tau, &v).unwrap().abs() < 1e-11);
        let load = distributional_load(&tau).unwrap();
        assert!(load.vertex.iter().all(|x| x.abs() < 1e-11));
        assert!(load.edge.iter().flatten().all(|x| x.abs() < 1e-11));
    }

    #[test]
    fn three_forms_agree() {
        for (mesh, k) in [
            (Mesh::unit_square(2, &mixed_spec()).unwrap(), 2),
            (Mesh::unit_square(2, &mixed_spec()).unwrap(), 3),
            (Mesh::l_shape(1, &BoundarySpec::clamped()).unwrap(), 3),
        ] {
            let mesh = Arc::new(mesh);
            let hs = Arc::new(crate::spaces::HhjSpace::new(mesh.clone(), k).unwrap());
            let ls = Arc::new(LagrangeSpace::new(mesh.clone(), k).unwrap());
            for seed in 0..3 {
                let tau = random_moment(&hs, seed);
                let v = random_deflection(&ls, seed);
                let a = pairing_jump(&tau, &v).unwrap();
                let b = pairing_div(&tau, &v).unwrap();
                let c = pairing_vertexform(&tau, &v).unwrap();
                let load = distributional_load(&tau).unwrap();
                let d = load.action(&v).unwrap();
                let s = 1.0 + a.abs();
                assert!((a - b).abs() < 1e-11 * s, "{a} {b}");
                assert!((a - c).abs() < 1e-11 * s, "{a} {c}");
                assert!((a - d).abs() < 1e-11 * s, "{a} {d}");
                assert!(load.fit_remainder < 1e-9, "{}", load.fit_remainder);
                let pv = pairing_vector(&tau, &ls).unwrap();
                let e: f64 = pv.iter().zip(&v.coeffs).map(|(x, y)| x * y).sum();
                assert!((a - e).abs() < 1e-11 * s);
            }
        }
    }

    #[test]
    fn lowest_order_load_has_no_area_density() {
        let mesh = Arc::new(Mesh::unit_square(2, &mixed_spec()).unwrap());
        let hs = Arc::new(crate::spaces::HhjSpace::new(mesh, 2).unwrap());
        let load = distributional_load(&random_moment(&hs, 5)).unwrap();
        assert!(load.element.degree < 0);
        assert!(load.fit_remainder < 1e-10);
    }

    #[test]
    fn inadmissible_deflection_rejected() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let hs = Arc::new(crate::spaces::HhjSpace::new(mesh.clone(), 2).unwrap());
        let ls = Arc::new(LagrangeSpace::new(mesh, 2).unwrap());
        let one = ls.interpolate(&|_| 1.0, 4).unwrap();
        let tau = random_moment(&hs, 1);
        assert!(matches!(pairing_jump(&tau, &one), Err(Error::NotAdmissible(_))));
        assert!(matches!(pairing_vertexform(&tau, &one), Err(Error::NotAdmissible(_))));
    }

    #[test]
    fn conforming_deflection_needs_no_edge_terms() {
        use crate::spaces::{C1Space, C1Variant};
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let hs = Arc::new(crate::spaces::HhjSpace::new(mesh.clone(), 3).unwrap());
        let cs = Arc::new(C1Space::new(mesh.clone(), C1Variant::CloughTocher).unwrap());
        let w = cs.field(pseudo_random(cs.dim(), 9)).unwrap();
        let tau = random_moment(&hs, 2);
        let a = pairing_jump(&tau, &w).unwrap();
        let mut vol = 0.0;
        for t in 0..mesh.num_triangles() {
            let el = hs.element(t).unwrap();
            let c = tau.local_coeffs(t);
            for piece in 0..3 {
                let (p, wts) = composite_piece_rule(&mesh, t, piece, 8).unwrap();
                for (x, wt) in p.iter().zip(&wts) {
                    let s = HhjElement::combine(&el.eval_basis(*x), &c);
                    vol += wt * ddot(&s.val, &w.eval_piece(t, piece, *x).hess);
                }
            }
        }
        assert!((a - vol).abs() < 1e-11 * (1.0 + vol.abs()));
        let b = pairing_vertexform(&tau, &w).unwrap();
        assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()), "{a} {b}");
    }

    #[test]
    fn flipping_an_edge_leaves_pairings_unchanged() {
        let mesh = Mesh::unit_square(2, &mixed_spec()).unwrap();
        let e = (0..mesh.num_edges()).find(|&e| mesh.edge(e).is_interior()).unwrap();
        let flipped = mesh.with_flipped_edge(e).unwrap();
        let k = 3;
        let a = Arc::new(mesh);
        let b = Arc::new(flipped);
        let hs_a = Arc::new(crate::spaces::HhjSpace::new(a.clone(), k).unwrap());
        let hs_b = Arc::new(crate::spaces::HhjSpace::new(b.clone(), k).unwrap());
        let ls_a = Arc::new(LagrangeSpace::new(a.clone(), k).unwrap());
        let ls_b = Arc::new(LagrangeSpace::new(b.clone(), k).unwrap());
        let tau_a = random_moment(&hs_a, 4);
        let v_a = random_deflection(&ls_a, 4);
        // Same fields in the flipped numbering: odd edge moments change sign.
        let mut tc = tau_a.coeffs.clone();
        for j in (1..k).step_by(2) {
            tc[hs_a.edge_dof(e, j)] *= -1.0;
        }
        let mut vc = v_a.coeffs.clone();
        let nv = a.num_vertices();
        for j in (1..k - 1).step_by(2) {
            vc[nv + e * (k - 1) + j] *= -1.0;
        }
        let tau_b = MomentField::new(hs_b, tc).unwrap();
        let v_b = ScalarField::new(ls_b, vc).unwrap();
        for (x, y) in [
            (pairing_jump(&tau_a, &v_a).unwrap(), pairing_jump(&tau_b, &v_b).unwrap()),
            (pairing_vertexform(&tau_a, &v_a).unwrap(), pairing_vertexform(&tau_b, &v_b).unwrap()),
        ] {
            assert!((x - y).abs() < 1e-11 * (1.0 + x.abs()), "{x} {y}");
        }
    }

    #[test]
    fn dg_solution_is_equilibrated() {
        for (spec, alpha) in [(BoundarySpec::clamped(), 9.0), (mixed_spec(), 18.0)] {
            let mesh = Arc::new(Mesh::unit_square(3, &spec).unwrap());
            for k in 2..=3 {
                let load = Load::constant(1.0);
                let p = IpdgProblem::new(mesh.clone(), k, load.clone()).with_alpha(alpha);
                let u = ipdg::solve(&p).unwrap();
                let sigma = equilibrate(&u, alpha, &load).unwrap();
                let (worst, _) = equilibrium_defect(&sigma, &load).unwrap();
                assert!(worst < 1e-9, "k={k}: {worst}");
            }
        }
    }

    #[test]
    fn wrong_penalty_is_detected() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let load = Load::constant(1.0);
        let u = ipdg::solve(&IpdgProblem::new(mesh, 2, load.clone())).unwrap();
        assert!(matches!(
            equilibrate(&u, 4.0, &load),
            Err(Error::EquilibrationResidual { .. })
        ));
    }

    #[test]
    fn zero_solution_gives_zero_tensor() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let u = ipdg::solve(&IpdgProblem::new(mesh, 2, Load::zero())).unwrap();
        let s = equilibrate(&u, 9.0, &Load::zero()).unwrap();
        assert!(s.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn construction_is_local() {
        let mesh = Arc::new(Mesh::unit_square(4, &mixed_spec()).unwrap());
        let k = 3;
        let ls = Arc::new(LagrangeSpace::new(mesh.clone(), k).unwrap());
        let u = random_deflection(&ls, 8);
        let s0 = equilibrate_unchecked(&u, 16.0).unwrap();
        let t = 13;
        let (idx, _) = ls.local_dofs(t);
        let mut c = u.coeffs.clone();
        *c.get_mut(*idx.last().unwrap()).unwrap() += 1.0;
        let s1 = equilibrate_unchecked(&ScalarField::new(ls.clone(), c).unwrap(), 16.0).unwrap();
        let mut allowed = vec![false; s0.space.dim()];
        for el in std::iter::once(t).chain(mesh.neighbors(t)) {
            for i in s0.space.local_dofs(el).0 {
                allowed[i] = true;
            }
        }
        let mut changed = 0;
        for i in 0..allowed.len() {
            if (s0.coeffs[i] - s1.coeffs[i]).abs() > 1e-13 {
                assert!(allowed[i], "dof {i} changed");
                changed += 1;
            }
        }
        assert!(changed > 0);
    }
}
