//! The Hellan-Herrmann-Johnson mixed method: find `σ_h ∈ M_h`, `u_h ∈ V_h^0`
//! with
//!
//! ```text
//! a(σ_h, τ) + b(τ, u_h) = 0          for all τ ∈ M_h,
//! b(σ_h, v)             = -(f, v)    for all v ∈ V_h^0,
//! ```
//!
//! where `a(σ, τ) = ∫ σ:τ` and `b(τ, v) = Σ_T (∫_T div τ·∇v - ∫_∂T τ_nt ∂_t v)`.
//! The second equation states that `σ_h` is equilibrated.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{contract, ddot, dot, rot90, sub};
use crate::ipdg::load_vector;
use crate::linalg::{DofMap, SparseMatrix, TripletBuilder};
use crate::mesh::Mesh;
use crate::problem::Load;
use crate::quadrature;
use crate::spaces::{local_edge_point, HhjElement, HhjSpace, LagrangeSpace, MomentField, ScalarField};

/// The assembled saddle-point system.
#[derive(Clone, Debug)]
pub struct HhjSystem {
    pub moments: Arc<HhjSpace>,
    pub deflections: Arc<LagrangeSpace>,
    /// `a(σ_j, σ_i)` over all of `M_h`.
    pub mass: SparseMatrix,
    /// `b(τ_j, φ_i)` as triplets `(i, j, value)`, over all basis functions.
    pub coupling: Vec<(usize, usize, f64)>,
    /// `(f, φ_i)` over all of `V_h`.
    pub load: Vec<f64>,
    pub moment_dofs: DofMap,
    pub deflection_dofs: DofMap,
}

/// Element contribution `b(τ_a, φ_b)` for the local bases of `t`.
fn local_coupling(
    mesh: &Mesh,
    t: usize,
    el: &HhjElement,
    space: &LagrangeSpace,
) -> Result<Vec<f64>> {
    let k = space.degree();
    let nt = el.nbasis();
    let nv = space.local_dim();
    let mut out = vec![0.0; nt * nv];
    let scale = 2.0 * mesh.area(t);
    let rule = quadrature::triangle_rule(2 * k)?;
    let tab = space.tabulate(t, &rule.points);
    for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
        let tau = el.eval_basis(*p);
        for (a, ta) in tau.iter().enumerate() {
            for b in 0..nv {
                out[a * nv + b] += w * scale * dot(ta.div, tab.at(q, b).grad);
            }
        }
    }
    let erule = quadrature::edge_rule(2 * k)?;
    let tri = mesh.triangle(t);
    for i in 0..3 {
        let tv = sub(mesh.vertex(tri[(i + 2) % 3]), mesh.vertex(tri[(i + 1) % 3]));
        let len = tv[0].hypot(tv[1]);
        let tang = [tv[0] / len, tv[1] / len];
        let r = rot90(tang);
        let nrm = [-r[0], -r[1]];
        let pts: Vec<_> = erule.points.iter().map(|p| local_edge_point(i, p[0])).collect();
        let etab = space.tabulate(t, &pts);
        for (q, (p, w)) in pts.iter().zip(&erule.weights).enumerate() {
            let tau = el.eval_basis(*p);
            for (a, ta) in tau.iter().enumerate() {
                let nt_val = contract(&ta.val, nrm, tang);
                for b in 0..nv {
                    out[a * nv + b] -= w * len * nt_val * dot(etab.at(q, b).grad, tang);
                }
            }
        }
    }
    Ok(out)
}

/// Assembles the blocks of the mixed system.
pub fn assemble(mesh: Arc<Mesh>, k: usize, load: &Load) -> Result<HhjSystem> {
    if !mesh.is_conforming() {
        return Err(Error::InvalidMesh("mesh is not conforming".into()));
    }
    let moments = Arc::new(HhjSpace::new(Arc::clone(&mesh), k)?);
    let deflections = Arc::new(LagrangeSpace::new(Arc::clone(&mesh), k)?);
    let mut mass = TripletBuilder::new(moments.dim());
    let mut coupling = Vec::new();
    let rule = quadrature::triangle_rule(2 * k)?;
    for t in 0..mesh.num_triangles() {
        let el = moments.element(t)?;
        let (midx, _) = moments.local_dofs(t);
        let (vidx, _) = deflections.local_dofs(t);
        let nt = el.nbasis();
        let scale = 2.0 * mesh.area(t);
        let mut local = vec![0.0; nt * nt];
        for (p, w) in rule.points.iter().zip(&rule.weights) {
            let tau = el.eval_basis(*p);
            for a in 0..nt {
                for b in 0..nt {
                    local[a * nt + b] += w * scale * ddot(&tau[a].val, &tau[b].val);
                }
            }
        }
        for a in 0..nt {
            for b in 0..nt {
                mass.add(midx[a], midx[b], local[a * nt + b]);
            }
        }
        let cb = local_coupling(&mesh, t, &el, &deflections)?;
        let nv = vidx.len();
        for a in 0..nt {
            for b in 0..nv {
                let v = cb[a * nv + b];
                if v != 0.0 {
                    coupling.push((vidx[b], midx[a], v));
                }
            }
        }
    }
    let load_vec = load_vector(&deflections, load)?;
    Ok(HhjSystem {
        moment_dofs: DofMap::from_constrained(moments.constrained()),
        deflection_dofs: DofMap::from_constrained(deflections.constrained()),
        mass: mass.build()?,
        coupling,
        load: load_vec,
        moments,
        deflections,
    })
}

impl HhjSystem {
    /// `b(τ, v)` for full coefficient vectors.
    pub fn b_form(&self, tau: &[f64], v: &[f64]) -> f64 {
        self.coupling.iter().map(|&(i, j, c)| v[i] * c * tau[j]).sum()
    }

    /// Solves the saddle-point problem by sparse LU.
    pub fn solve(&self) -> Result<(MomentField, ScalarField)> {
        let nm = self.moment_dofs.num_free();
        let nv = self.deflection_dofs.num_free();
        let mut tb = TripletBuilder::new(nm + nv);
        for (i, j, v) in self.mass.entries() {
            if let (Some(ri), Some(rj)) = (self.moment_dofs.reduced[i], self.moment_dofs.reduced[j]) {
                tb.add(ri, rj, v);
            }
        }
        for &(i, j, v) in &self.coupling {
            if let (Some(ri), Some(rj)) = (self.deflection_dofs.reduced[i], self.moment_dofs.reduced[j]) {
                tb.add(nm + ri, rj, v);
                tb.add(rj, nm + ri, v);
            }
        }
        let mut rhs = vec![0.0; nm + nv];
        for (r, &f) in self.deflection_dofs.full.iter().enumerate() {
            rhs[nm + r] = -self.load[f];
        }
        let x = if rhs.iter().all(|&b| b == 0.0) {
            rhs.clone()
        } else {
            tb.build()?.solve(&rhs)?
        };
        let sigma = MomentField::new(Arc::clone(&self.moments), self.moment_dofs.expand(&x[..nm]))?;
        let u = ScalarField::new(Arc::clone(&self.deflections), self.deflection_dofs.expand(&x[nm..]))?;
        Ok((sigma, u))
    }
}

/// Solves the mixed problem on `mesh` with moments of degree `k-1` and
/// deflections of degree `k`.
pub fn solve(mesh: Arc<Mesh>, k: usize, load: &Load) -> Result<(MomentField, ScalarField)> {
    assemble(mesh, k, load)?.solve()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BcKind, BoundarySpec};

    fn mixed_square(n: usize) -> Arc<Mesh> {
        let spec = BoundarySpec::uniform(BcKind::SimplySupported)
            .with_segment([0.0, 0.0], [1.0, 0.0], BcKind::Clamped)
            .with_segment([0.0, 1.0], [1.0, 1.0], BcKind::Free);
        Arc::new(Mesh::unit_square(n, &spec).unwrap())
    }

    #[test]
    fn zero_load() {
        let (s, u) = solve(mixed_square(2), 2, &Load::zero()).unwrap();
        assert!(s.coeffs.iter().chain(&u.coeffs).all(|&c| c == 0.0));
    }

    #[test]
    fn first_block_row_vanishes() {
        for k in 2..=3 {
            let sys = assemble(mixed_square(3), k, &Load::new(|x| 1.0 + x[0])).unwrap();
            let (s, u) = sys.solve().unwrap();
            let a = sys.mass.mul_vec(&s.coeffs);
            let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for i in 0..sys.moments.dim() {
                if sys.moments.constrained()[i] {
                    continue;
                }
                let mut e = vec![0.0; sys.moments.dim()];
                e[i] = 1.0;
                let r = a[i] + sys.b_form(&e, &u.coeffs);
                assert!(r.abs() <= 1e-10 * (1.0 + scale), "k={k} dof {i}: {r}");
            }
            for i in 0..sys.deflections.dim() {
                if sys.deflections.constrained()[i] {
                    continue;
                }
                let mut e = vec![0.0; sys.deflections.dim()];
                e[i] = 1.0;
                let r = sys.b_form(&s.coeffs, &e) + sys.load[i];
                assert!(r.abs() <= 1e-10, "k={k} dof {i}: {r}");
            }
        }
    }

    #[test]
    fn moment_mass_is_positive_definite() {
        let sys = assemble(mixed_square(1), 2, &Load::zero()).unwrap();
        let m = sys.mass.to_dense();
        assert!(m.clone().cholesky().is_some());
        assert!((&m - m.transpose()).amax() < 1e-13 * m.amax());
    }
}
