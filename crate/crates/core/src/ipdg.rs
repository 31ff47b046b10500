//! The `C^0` interior penalty method for `Δ²u = f`.
//!
//! Find `u_h ∈ V_h^0` with `A_h(u_h, v) = (f, v)` for all `v ∈ V_h^0`, where
//!
//! ```text
//! A_h(u, v) = Σ_T ∫_T ∇²u : ∇²v
//!           - Σ_E ∫_E ([∂n u] {∂nn v} + {∂nn u} [∂n v])
//!           + Σ_E α/h_E ∫_E [∂n u] [∂n v]
//! ```
//!
//! and the edge sums run over interior and clamped edges. On simply
//! supported and free edges the natural conditions carry no edge terms.

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::geometry::{contract, ddot, Point};
use crate::linalg::{DofMap, SparseMatrix, TripletBuilder};
use crate::mesh::{BcKind, Mesh};
use crate::problem::Load;
use crate::quadrature;
use crate::spaces::{edge_ref_point, LagrangeSpace, ScalarField};

#[derive(Clone, Debug)]
pub struct IpdgProblem {
    pub mesh: Arc<Mesh>,
    pub k: usize,
    /// Penalty parameter `α`; the penalty weight on an edge is `α / h_E`.
    pub alpha: f64,
    pub load: Load,
}

impl IpdgProblem {
    /// Problem with the default penalty `α = (k+1)²`.
    pub fn new(mesh: Arc<Mesh>, k: usize, load: Load) -> Self {
        let alpha = ((k + 1) * (k + 1)) as f64;
        Self {
            mesh,
            k,
            alpha,
            load,
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "penalty parameter must be positive, got {}",
                self.alpha
            )));
        }
        if !self.mesh.is_conforming() {
            return Err(Error::InvalidMesh("mesh is not conforming".into()));
        }
        Ok(())
    }
}

/// Whether edge `e` carries jump terms: interior and clamped edges.
#[inline]
pub fn is_dg_edge(mesh: &Mesh, e: usize) -> bool {
    match mesh.edge(e).boundary {
        None => true,
        Some(kind) => kind == BcKind::Clamped,
    }
}

/// Traces of the local basis functions of both neighbours of an edge at the
/// points of an edge rule.
#[derive(Clone, Debug)]
pub struct EdgeTraces {
    /// Global dofs, first of `T1` then of `T2`; shared dofs appear twice.
    pub dofs: Vec<usize>,
    /// `[q][i]`: contribution of dof `i` to `[∂n v]` at point `q`.
    pub jump: Vec<Vec<f64>>,
    /// `[q][i]`: contribution of dof `i` to `{∂nn v}` at point `q`.
    pub avg_nn: Vec<Vec<f64>>,
}

impl EdgeTraces {
    pub fn new(space: &LagrangeSpace, e: usize, params: &[f64]) -> Self {
        let mesh = space.mesh();
        let edge = mesh.edge(e);
        let n = mesh.edge_normal(e);
        let sides: Vec<(usize, f64)> = match edge.right {
            Some(r) => vec![(edge.left, 1.0), (r, -1.0)],
            None => vec![(edge.left, 1.0)],
        };
        let avg_weight = if sides.len() == 2 { 0.5 } else { 1.0 };
        let nq = params.len();
        let mut dofs = Vec::new();
        let mut jump = vec![Vec::new(); nq];
        let mut avg_nn = vec![Vec::new(); nq];
        for (t, sign) in sides {
            let (idx, _) = space.local_dofs(t);
            let pts: Vec<Point> = params.iter().map(|&s| edge_ref_point(mesh, t, e, s)).collect();
            let tab = space.tabulate(t, &pts);
            for q in 0..nq {
                for b in 0..tab.nbasis {
                    let j = tab.at(q, b);
                    jump[q].push(sign * (j.grad[0] * n[0] + j.grad[1] * n[1]));
                    avg_nn[q].push(avg_weight * contract(&j.hess, n, n));
                }
            }
            dofs.extend(idx);
        }
        Self { dofs, jump, avg_nn }
    }

    /// `([∂n v], {∂nn v})` of a coefficient vector at point `q`.
    pub fn combine(&self, q: usize, coeffs: &[f64]) -> (f64, f64) {
        let mut j = 0.0;
        let mut a = 0.0;
        for (i, &d) in self.dofs.iter().enumerate() {
            j += self.jump[q][i] * coeffs[d];
            a += self.avg_nn[q][i] * coeffs[d];
        }
        (j, a)
    }
}

/// The assembled system on all of `V_h` together with its restriction to
/// `V_h^0`.
#[derive(Clone, Debug)]
pub struct IpdgSystem {
    pub space: Arc<LagrangeSpace>,
    /// `A_h(φ_j, φ_i)` over all basis functions of `V_h`.
    pub matrix: SparseMatrix,
    /// `(f, φ_i)` over all basis functions of `V_h`.
    pub rhs: Vec<f64>,
    pub dofs: DofMap,
    pub reduced: SparseMatrix,
    pub reduced_rhs: Vec<f64>,
}

impl IpdgSystem {
    pub fn solve(&self) -> Result<ScalarField> {
        let x = if self.dofs.num_free() == 0 {
            Vec::new()
        } else if self.reduced_rhs.iter().all(|&b| b == 0.0) {
            vec![0.0; self.dofs.num_free()]
        } else {
            self.reduced.solve_spd(&self.reduced_rhs)?
        };
        ScalarField::new(Arc::clone(&self.space), self.dofs.expand(&x))
    }

    /// `A_h(u, v)`.
    pub fn form(&self, u: &[f64], v: &[f64]) -> f64 {
        self.matrix.bilinear(v, u)
    }
}

/// Assembles the stiffness matrix and load vector.
pub fn assemble(problem: &IpdgProblem) -> Result<IpdgSystem> {
    problem.validate()?;
    let space = Arc::new(LagrangeSpace::new(Arc::clone(&problem.mesh), problem.k)?);
    let matrix = assemble_matrix(&space, problem.alpha, false)?;
    let rhs = load_vector(&space, &problem.load)?;
    let dofs = DofMap::from_constrained(space.constrained());
    let (reduced, reduced_rhs) = restrict(&matrix, &rhs, &dofs)?;
    Ok(IpdgSystem {
        space,
        matrix,
        rhs,
        dofs,
        reduced,
        reduced_rhs,
    })
}

/// Solves the discrete problem.
pub fn solve(problem: &IpdgProblem) -> Result<ScalarField> {
    assemble(problem)?.solve()
}

fn restrict(m: &SparseMatrix, b: &[f64], dofs: &DofMap) -> Result<(SparseMatrix, Vec<f64>)> {
    let mut tb = TripletBuilder::new(dofs.num_free());
    for (i, j, v) in m.entries() {
        if let (Some(ri), Some(rj)) = (dofs.reduced[i], dofs.reduced[j]) {
            tb.add(ri, rj, v);
        }
    }
    Ok((tb.build()?, dofs.restrict(b)))
}

/// `A_h` (or, with `gram`, the inner product inducing the DG norm) over all
/// basis functions.
fn assemble_matrix(space: &LagrangeSpace, alpha: f64, gram: bool) -> Result<SparseMatrix> {
    let mesh = space.mesh();
    let k = space.degree();
    let n = space.local_dim();
    let mut tb = TripletBuilder::new(space.dim());
    let rule = quadrature::triangle_rule(2 * k)?;
    for t in 0..mesh.num_triangles() {
        let (idx, _) = space.local_dofs(t);
        let tab = space.tabulate(t, &rule.points);
        let scale = 2.0 * mesh.area(t);
        let mut local = vec![0.0; n * n];
        for (q, w) in rule.weights.iter().enumerate() {
            let w = w * scale;
            for a in 0..n {
                let ha = tab.at(q, a).hess;
                for b in 0..n {
                    local[a * n + b] += w * ddot(&ha, &tab.at(q, b).hess);
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                tb.add(idx[a], idx[b], local[a * n + b]);
            }
        }
    }
    let erule = quadrature::edge_rule(2 * k)?;
    let params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
    for e in 0..mesh.num_edges() {
        if !is_dg_edge(mesh, e) {
            continue;
        }
        let h = mesh.edge_length(e);
        let tr = EdgeTraces::new(space, e, &params);
        let m = tr.dofs.len();
        let mut local = vec![0.0; m * m];
        for (q, w) in erule.weights.iter().enumerate() {
            let w = w * h;
            let (jq, aq) = (&tr.jump[q], &tr.avg_nn[q]);
            for a in 0..m {
                for b in 0..m {
                    let mut v = alpha / h * jq[a] * jq[b];
                    if !gram {
                        v -= jq[a] * aq[b] + aq[a] * jq[b];
                    }
                    local[a * m + b] += w * v;
                }
            }
        }
        for a in 0..m {
            for b in 0..m {
                tb.add(tr.dofs[a], tr.dofs[b], local[a * m + b]);
            }
        }
    }
    tb.build()
}

/// `(f, φ_i)` for every basis function.
pub fn load_vector(space: &LagrangeSpace, load: &Load) -> Result<Vec<f64>> {
    let mesh = space.mesh();
    let mut b = vec![0.0; space.dim()];
    if load.is_zero() {
        return Ok(b);
    }
    for t in 0..mesh.num_triangles() {
        let (idx, _) = space.local_dofs(t);
        let rule = load.rule(mesh, t, space.degree())?;
        let tab = space.tabulate(t, &rule.points);
        let map = mesh.affine(t);
        for (q, (p, w)) in rule.points.iter().zip(&rule.weights).enumerate() {
            let fx = w * load.eval(map.to_physical(*p));
            for (a, &i) in idx.iter().enumerate() {
                b[i] += fx * tab.at(q, a).val;
            }
        }
    }
    Ok(b)
}

/// Squared parts of the DG norm
/// `‖v‖²_DG = Σ_T ‖∇²v‖²_{0,T} + Σ_E α/h_E ‖[∂n v]‖²_{0,E}`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DgNormParts {
    pub hessian: f64,
    pub jump: f64,
}

impl DgNormParts {
    pub fn total(&self) -> f64 {
        (self.hessian + self.jump).sqrt()
    }
}

/// Per-element squared broken Hessian norms `‖∇²v‖²_{0,T}`.
pub fn hessian_norms(v: &ScalarField) -> Result<Vec<f64>> {
    let mesh = v.mesh();
    let rule = quadrature::triangle_rule(2 * v.space.degree())?;
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let vals = v.eval_many(t, &rule.points);
            let scale = 2.0 * mesh.area(t);
            vals.iter()
                .zip(&rule.weights)
                .map(|(j, w)| w * scale * ddot(&j.hess, &j.hess))
                .sum()
        })
        .collect())
}

/// Per-edge squared jump terms `α/h_E ‖[∂n v]‖²_{0,E}` (zero on edges that
/// carry no jump terms).
pub fn jump_norms(v: &ScalarField, alpha: f64) -> Result<Vec<f64>> {
    let mesh = v.mesh();
    let erule = quadrature::edge_rule(2 * v.space.degree())?;
    let params: Vec<f64> = erule.points.iter().map(|p| p[0]).collect();
    Ok((0..mesh.num_edges())
        .map(|e| {
            if !is_dg_edge(mesh, e) {
                return 0.0;
            }
            let h = mesh.edge_length(e);
            let tr = EdgeTraces::new(&v.space, e, &params);
            (0..params.len())
                .map(|q| {
                    let (j, _) = tr.combine(q, &v.coeffs);
                    erule.weights[q] * h * alpha / h * j * j
                })
                .sum()
        })
        .collect())
}

pub fn dg_norm(v: &ScalarField, alpha: f64) -> Result<DgNormParts> {
    Ok(DgNormParts {
        hessian: hessian_norms(v)?.iter().sum(),
        jump: jump_norms(v, alpha)?.iter().sum(),
    })
}

/// Smallest generalized eigenvalue of `A_h` against the DG inner product on
/// `V_h^0`: the discrete coercivity constant. Dense; meant for small meshes.
pub fn coercivity_constant(problem: &IpdgProblem) -> Result<f64> {
    let sys = assemble(problem)?;
    let gram = assemble_matrix(&sys.space, problem.alpha, true)?;
    let (g, _) = restrict(&gram, &sys.rhs, &sys.dofs)?;
    let a = sys.reduced.to_dense();
    let g = g.to_dense();
    let chol = g.cholesky().ok_or_else(|| Error::SolverBreakdown {
        reason: "DG Gram matrix is not positive definite".into(),
        residual: f64::NAN,
    })?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::SolverBreakdown {
            reason: "singular Cholesky factor".into(),
            residual: f64::NAN,
        })?;
    let c: DMatrix<f64> = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;

    fn square(n: usize) -> Arc<Mesh> {
        Arc::new(Mesh::unit_square(n, &BoundarySpec::clamped()).unwrap())
    }

    #[test]
    fn matrix_is_symmetric() {
        let spec = BoundarySpec::uniform(BcKind::Clamped)
            .with_segment([0.0, 0.0], [0.0, 1.0], BcKind::SimplySupported)
            .with_segment([0.0, 1.0], [1.0, 1.0], BcKind::Free);
        let m = Arc::new(Mesh::unit_square(3, &spec).unwrap());
        for k in 2..=3 {
            let sys = assemble(&IpdgProblem::new(m.clone(), k, Load::constant(1.0))).unwrap();
            let d = sys.matrix.to_dense();
            let asym = (&d - d.transpose()).amax();
            assert!(asym <= 1e-12 * d.amax(), "{asym}");
        }
    }

    #[test]
    fn coercivity_probe() {
        for k in 2..=3 {
            let p = IpdgProblem::new(square(2), k, Load::zero());
            let gamma = coercivity_constant(&p).unwrap();
            assert!(gamma > 0.0, "k={k}: {gamma}");
        }
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let u = solve(&IpdgProblem::new(square(3), 2, Load::zero())).unwrap();
        assert!(u.coeffs.iter().all(|&c| c == 0.0));
    }

    #[test]
    fn rejects_bad_penalty() {
        let p = IpdgProblem::new(square(2), 2, Load::zero()).with_alpha(0.0);
        assert!(matches!(assemble(&p), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn galerkin_orthogonality_and_linearity() {
        let f = Load::new(|x| 1.0 + x[0] * x[1]);
        let p = IpdgProblem::new(square(3), 3, f.clone());
        let sys = assemble(&p).unwrap();
        let u = sys.solve().unwrap();
        for r in 0..10 {
            let v: Vec<f64> = (0..sys.space.dim())
                .map(|i| {
                    if sys.space.constrained()[i] {
                        0.0
                    } else {
                        (((i + 3) * (r + 7) * 31) % 13) as f64 / 6.0 - 1.0
                    }
                })
                .collect();
            let lhs = sys.form(&u.coeffs, &v);
            let rhs: f64 = v.iter().zip(&sys.rhs).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10 * (1.0 + rhs.abs()));
        }
        let u2 = solve(&IpdgProblem::new(square(3), 3, f.scaled(2.5))).unwrap();
        for (a, b) in u.coeffs.iter().zip(&u2.coeffs) {
            assert!((2.5 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn norm_of_global_quadratic() {
        let m = Arc::new(
            Mesh::new(
                vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]],
                vec![[1, 2, 0], [3, 0, 2]],
                &BoundarySpec::clamped(),
            )
            .unwrap(),
        );
        let space = Arc::new(LagrangeSpace::new(m, 2).unwrap());
        let v = space.interpolate(&|x| x[0] * x[0], 4).unwrap();
        let parts = dg_norm(&v, 9.0).unwrap();
        // Interior edge has no jump; boundary edges x = 1 carry ∂n v = 2.
        assert!((parts.hessian - 4.0).abs() < 1e-11);
        let zero = dg_norm(&space.zero_field(), 9.0).unwrap();
        assert_eq!(zero, DgNormParts::default());
        // Consistency: without jumps in the interior the form equals the
        // broken Hessian norm plus boundary terms; check through the form.
        let sys = assemble(&IpdgProblem::new(space.mesh().clone(), 2, Load::zero())).unwrap();
        let form = sys.form(&v.coeffs, &v.coeffs);
        // boundary x=1: ∂n v = 2, ∂nn v = 2: -2 ∫ 2·2 + 9/1 ∫ 4 = -8 + 36
        // boundary x=0: ∂n v = 0
        // boundary y=0,1: ∂n v = 0
        assert!((form - (4.0 - 8.0 + 36.0)).abs() < 1e-10, "{form}");
        assert!((parts.jump - 36.0).abs() < 1e-10);
    }

    #[test]
    fn norm_parts_match_direct_sums() {
        let m = Arc::new(Mesh::l_shape(1, &BoundarySpec::clamped()).unwrap());
        let space = Arc::new(LagrangeSpace::new(m.clone(), 3).unwrap());
        let c: Vec<f64> = (0..space.dim()).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let v = ScalarField::new(space.clone(), c).unwrap();
        let parts = dg_norm(&v, 16.0).unwrap();
        // Gram matrix of the DG norm must reproduce the same value.
        let gram = assemble_matrix(&space, 16.0, true).unwrap();
        let g = gram.bilinear(&v.coeffs, &v.coeffs);
        assert!((g - (parts.hessian + parts.jump)).abs() < 1e-10 * g);
    }
}
