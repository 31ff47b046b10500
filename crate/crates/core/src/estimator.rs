//! Guaranteed error bounds in the DG norm from an equilibrated moment tensor
//! `σ` and a conforming recovery `u^c` of the discrete deflection `u_h`:
//!
//! ```text
//! η^eq      = ‖∇²u^c - σ‖
//! η^nonconf = ‖∇²_h (u_h - u^c)‖
//! η^mean    = ‖∇²_h u_h - (∇²u^c + σ)/2‖
//! η^jump    = (Σ_E α/h_E ‖[∂n u_h]‖²_E)^{1/2}
//! η^osc     = c_osc (Σ_T h_T⁴ ‖f - f̄‖²_T)^{1/2}
//! ```
//!
//! with `f̄` the element-wise projection onto polynomials of degree `k-3`.
//! The improved bound is `(η^mean² + η^jump²)^{1/2} + η^eq/2 + η^osc`, the
//! basic bound `(η^nonconf² + η^jump²)^{1/2} + η^eq + η^osc`.

use crate::error::{Error, Result};
use crate::geometry::{ddot, Sym};
use crate::ipdg::{hessian_norms, jump_norms};
use crate::problem::{ExactSolution, Load};
use crate::spaces::{composite_piece_rule, l2_project_piecewise, C1Field, MomentField, ScalarField};

/// Constant of the data oscillation majorant.
pub const OSC_CONSTANT: f64 = 0.3682146;

/// Squared element-wise contributions.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ElementIndicators {
    pub eq: Vec<f64>,
    pub nonconf: Vec<f64>,
    pub mean: Vec<f64>,
    /// Jump terms, each edge split evenly between its elements.
    pub jump: Vec<f64>,
    /// `h_T⁴ ‖f - f̄‖²_T` (without the constant).
    pub osc: Vec<f64>,
}

/// Global estimator components and, when an exact solution is known, the
/// exact error and efficiency indices.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ErrorReport {
    /// Dimension of `V_h^0`.
    pub dofs: usize,
    pub eta_eq: f64,
    pub eta_nonconf: f64,
    pub eta_mean: f64,
    pub eta_jump: f64,
    pub eta_osc: f64,
    /// `‖u - u_h‖_DG`.
    pub exact_error: Option<f64>,
    pub elements: ElementIndicators,
}

impl ErrorReport {
    /// `(η^mean² + η^jump²)^{1/2} + η^eq/2 + η^osc`.
    pub fn improved_bound(&self) -> f64 {
        self.eta_mean.hypot(self.eta_jump) + 0.5 * self.eta_eq + self.eta_osc
    }

    /// `(η^nonconf² + η^jump²)^{1/2} + η^eq + η^osc`.
    pub fn basic_bound(&self) -> f64 {
        guaranteed_bound_basic(self)
    }

    /// Efficiency of the basic bound.
    pub fn eff_eq(&self) -> Option<f64> {
        self.exact_error.map(|e| self.basic_bound() / e)
    }

    /// Efficiency of the improved bound.
    pub fn eff(&self) -> Option<f64> {
        self.exact_error.map(|e| self.improved_bound() / e)
    }

    /// Per-element indicator `η^eq(T)` used for marking.
    pub fn eq_indicators(&self) -> Vec<f64> {
        self.elements.eq.iter().map(|x| x.sqrt()).collect()
    }

    /// Values of the CSV columns
    /// `dofV, exact_err, eta_eq, eta_nonconf, eta_osc, eta_mean, eta_jump, eff_eq, eff`.
    pub fn csv_fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map_or_else(|| "nan".to_string(), fmt);
        vec![
            self.dofs.to_string(),
            opt(self.exact_error),
            fmt(self.eta_eq),
            fmt(self.eta_nonconf),
            fmt(self.eta_osc),
            fmt(self.eta_mean),
            fmt(self.eta_jump),
            opt(self.eff_eq()),
            opt(self.eff()),
        ]
    }
}

/// Column names of [`ErrorReport::csv_fields`].
pub const CSV_HEADER: [&str; 9] = [
    "dofV",
    "exact_err",
    "eta_eq",
    "eta_nonconf",
    "eta_osc",
    "eta_mean",
    "eta_jump",
    "eff_eq",
    "eff",
];

fn fmt(x: f64) -> String {
    format!("{x:.10e}")
}

/// The basic bound `(η^nonconf² + η^jump²)^{1/2} + η^eq + η^osc`.
pub fn guaranteed_bound_basic(r: &ErrorReport) -> f64 {
    r.eta_nonconf.hypot(r.eta_jump) + r.eta_eq + r.eta_osc
}

/// Squared oscillation terms `h_T⁴ ‖f - f̄‖²_T` with `f̄` of degree `k-3`.
pub fn oscillation_terms(u_h: &ScalarField, load: &Load) -> Result<Vec<f64>> {
    let mesh = u_h.mesh();
    let k = u_h.space.degree();
    let fbar = l2_project_piecewise(mesh, &|x| load.eval(x), k as i32 - 3, 2 * k + 6)?;
    (0..mesh.num_triangles())
        .map(|t| {
            let rule = load.rule(mesh, t, k)?;
            let map = mesh.affine(t);
            let s: f64 = rule
                .points
                .iter()
                .zip(&rule.weights)
                .map(|(p, w)| w * (load.eval(map.to_physical(*p)) - fbar.eval(t, *p)).powi(2))
                .sum();
            Ok(mesh.diameter(t).powi(4) * s)
        })
        .collect()
}

/// All estimator components for the discrete deflection `u_h`, the
/// equilibrated tensor `σ` and the conforming recovery `u^c`, all on the same
/// mesh. `exact` adds the exact DG error.
pub fn compute_report(
    u_h: &ScalarField,
    sigma: &MomentField,
    u_conf: &C1Field,
    load: &Load,
    alpha: f64,
    exact: Option<&dyn ExactSolution>,
) -> Result<ErrorReport> {
    let mesh = u_h.mesh();
    if !std::sync::Arc::ptr_eq(mesh, sigma.mesh()) || !std::sync::Arc::ptr_eq(mesh, u_conf.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let k = u_h.space.degree();
    let nt = mesh.num_triangles();
    let mut el = ElementIndicators {
        eq: vec![0.0; nt],
        nonconf: vec![0.0; nt],
        mean: vec![0.0; nt],
        jump: vec![0.0; nt],
        osc: oscillation_terms(u_h, load)?,
    };
    for t in 0..nt {
        let se = sigma.space.element(t)?;
        let sc = sigma.local_coeffs(t);
        for piece in 0..3 {
            let (pts, wts) = composite_piece_rule(mesh, t, piece, 2 * k + 2)?;
            let uh = u_h.eval_many(t, &pts);
            for ((p, w), j) in pts.iter().zip(&wts).zip(&uh) {
                let hc = u_conf.hessian(t, piece, *p);
                let s = crate::spaces::HhjElement::combine(&se.eval_basis(*p), &sc).val;
                let hu = j.hess;
                let d_eq: Sym = std::array::from_fn(|i| hc[i] - s[i]);
                let d_nc: Sym = std::array::from_fn(|i| hu[i] - hc[i]);
                let d_mean: Sym = std::array::from_fn(|i| hu[i] - 0.5 * (hc[i] + s[i]));
                el.eq[t] += w * ddot(&d_eq, &d_eq);
                el.nonconf[t] += w * ddot(&d_nc, &d_nc);
                el.mean[t] += w * ddot(&d_mean, &d_mean);
            }
        }
    }
    let jumps = jump_norms(u_h, alpha)?;
    for (e, j) in jumps.iter().enumerate() {
        let edge = mesh.edge(e);
        match edge.right {
            Some(r) => {
                el.jump[edge.left] += 0.5 * j;
                el.jump[r] += 0.5 * j;
            }
            None => el.jump[edge.left] += j,
        }
    }
    let sum = |v: &[f64]| v.iter().sum::<f64>().sqrt();
    let exact_error = match exact {
        Some(ex) => Some(exact_dg_error(u_h, ex, alpha)?),
        None => None,
    };
    Ok(ErrorReport {
        dofs: u_h.space.num_free(),
        eta_eq: sum(&el.eq),
        eta_nonconf: sum(&el.nonconf),
        eta_mean: sum(&el.mean),
        eta_jump: jumps.iter().sum::<f64>().sqrt(),
        eta_osc: OSC_CONSTANT * sum(&el.osc),
        exact_error,
        elements: el,
    })
}

/// `‖u - u_h‖_DG`; the jump part involves `u_h` only.
pub fn exact_dg_error(u_h: &ScalarField, exact: &dyn ExactSolution, alpha: f64) -> Result<f64> {
    let mesh = u_h.mesh();
    let k = u_h.space.degree();
    let mut hess = 0.0;
    for t in 0..mesh.num_triangles() {
        let rule = exact.error_rule(mesh, t, k)?;
        let map = mesh.affine(t);
        let uh = u_h.eval_many(t, &rule.points);
        for ((p, w), j) in rule.points.iter().zip(&rule.weights).zip(&uh) {
            let h = exact.jet(map.to_physical(*p)).hess;
            let d: Sym = std::array::from_fn(|i| h[i] - j.hess[i]);
            hess += w * ddot(&d, &d);
        }
    }
    let jump: f64 = jump_norms(u_h, alpha)?.iter().sum();
    Ok((hess + jump).sqrt())
}

/// Broken Hessian norm `‖∇²_h v‖` of a discrete deflection.
pub fn broken_hessian_norm(v: &ScalarField) -> Result<f64> {
    Ok(hessian_norms(v)?.iter().sum::<f64>().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{BoundarySpec, Mesh};
    use crate::problem::ClosedForm;
    use crate::spaces::{C1Space, C1Variant, HhjSpace, Jet2, LagrangeSpace};
    use std::sync::Arc;

    #[test]
    fn zero_inputs_give_zero_report() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let ls = Arc::new(LagrangeSpace::new(mesh.clone(), 2).unwrap());
        let hs = Arc::new(HhjSpace::new(mesh.clone(), 2).unwrap());
        let cs = Arc::new(C1Space::new(mesh.clone(), C1Variant::ReducedHct).unwrap());
        let r = compute_report(
            &ls.zero_field(),
            &hs.zero_field(),
            &cs.field(vec![0.0; cs.dim()]).unwrap(),
            &Load::zero(),
            9.0,
            None,
        )
        .unwrap();
        assert_eq!(r.improved_bound(), 0.0);
        assert_eq!(guaranteed_bound_basic(&r), 0.0);
        assert_eq!(r.eff(), None);
    }

    #[test]
    fn oscillation_of_unit_load() {
        // Eight elements with h_T = √2/2 and |T| = 1/8:
        // Σ h_T⁴ |T| = 8 · 1/4 · 1/8 = 1/4.
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let ls = Arc::new(LagrangeSpace::new(mesh, 2).unwrap());
        let osc = oscillation_terms(&ls.zero_field(), &Load::constant(1.0)).unwrap();
        let eta = OSC_CONSTANT * osc.iter().sum::<f64>().sqrt();
        assert!((eta - 0.5 * 0.3682146).abs() < 1e-12);
        assert!((eta - 0.1841073).abs() < 1e-7);
    }

    #[test]
    fn oscillation_vanishes_for_projected_degree() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let ls = Arc::new(LagrangeSpace::new(mesh, 3).unwrap());
        let osc = oscillation_terms(&ls.zero_field(), &Load::constant(2.0)).unwrap();
        assert!(osc.iter().all(|x| *x < 1e-26));
    }

    #[test]
    fn exact_error_of_representable_solution() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let ls = Arc::new(LagrangeSpace::new(mesh, 2).unwrap());
        let v = ls.interpolate(&|x| x[0] * x[1], 4).unwrap();
        // xy has no normal-derivative jumps; use its Hessian as the exact one.
        let ex = ClosedForm::new(
            |x| Jet2 {
                val: x[0] * x[1],
                grad: [x[1], x[0]],
                hess: [0.0, 1.0, 0.0],
            },
            None,
        );
        let hess_only = exact_dg_error(&v, &ex, 9.0).unwrap().powi(2) - jump_norms(&v, 9.0).unwrap().iter().sum::<f64>();
        assert!(hess_only.abs() < 1e-20);
    }

    #[test]
    fn basic_dominates_improved() {
        let r = ErrorReport {
            eta_eq: 2.0,
            eta_nonconf: 1.0,
            eta_mean: 1.5,
            eta_jump: 0.7,
            eta_osc: 0.1,
            ..Default::default()
        };
        assert!(r.basic_bound() >= r.improved_bound());
        assert_eq!(r.csv_fields().len(), CSV_HEADER.len());
    }
}
