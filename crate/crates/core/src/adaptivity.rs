//! Marking and the solve, equilibrate, recover, estimate, mark, refine loop.

use std::sync::Arc;

use crate::equilibration::{check_equilibrium, equilibrate};
use crate::error::{Error, Result};
use crate::estimator::{compute_report, ErrorReport};
use crate::hhj_solver;
use crate::ipdg::{self, IpdgProblem};
use crate::mesh::Mesh;
use crate::problem::{ExactSolution, Load};
use crate::spaces::{C1Field, C1Space, C1Variant, LagrangeSpace, MomentField, ScalarField};

/// Discretization producing `u_h` and the equilibrated tensor.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// `C^0` interior penalty solve followed by local equilibration.
    Ipdg,
    /// Hellan-Herrmann-Johnson mixed solve; its moment tensor is already
    /// equilibrated.
    Hhj,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ipdg" => Ok(Method::Ipdg),
            "hhj" => Ok(Method::Hhj),
            _ => Err(Error::InvalidArgument(format!("unknown method '{s}'"))),
        }
    }
}

/// Discretization parameters shared by all levels.
#[derive(Clone, Copy, Debug)]
pub struct Discretization {
    pub method: Method,
    pub k: usize,
    /// Penalty parameter `α` (also weighs the jump terms of the DG norm).
    pub alpha: f64,
}

/// Everything computed on one mesh.
#[derive(Clone, Debug)]
pub struct LevelResult {
    pub mesh: Arc<Mesh>,
    pub u_h: ScalarField,
    pub sigma: MomentField,
    pub u_conf: C1Field,
    pub report: ErrorReport,
}

/// Solves on `mesh`, builds the equilibrated tensor and the conforming
/// recovery and evaluates the estimator.
pub fn solve_and_estimate(
    mesh: Arc<Mesh>,
    disc: &Discretization,
    load: &Load,
    exact: Option<&dyn ExactSolution>,
) -> Result<LevelResult> {
    let (u_h, sigma) = match disc.method {
        Method::Ipdg => {
            let problem = IpdgProblem::new(Arc::clone(&mesh), disc.k, load.clone()).with_alpha(disc.alpha);
            let u = ipdg::solve(&problem)?;
            let s = equilibrate(&u, disc.alpha, load)?;
            (u, s)
        }
        Method::Hhj => {
            let (s, u) = hhj_solver::solve(Arc::clone(&mesh), disc.k, load)?;
            check_equilibrium(&s, load)?;
            (u, s)
        }
    };
    let variant = C1Variant::for_degree(disc.k)
        .ok_or_else(|| Error::InvalidArgument(format!("no conforming recovery for k = {}", disc.k)))?;
    let c1 = Arc::new(C1Space::new(Arc::clone(&mesh), variant)?);
    let u_conf = c1.project(&u_h)?;
    let report = compute_report(&u_h, &sigma, &u_conf, load, disc.alpha, exact)?;
    Ok(LevelResult {
        mesh,
        u_h,
        sigma,
        u_conf,
        report,
    })
}

/// Marking strategy.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Marking {
    /// `η(T) > θ max η`.
    Maximum,
    /// Smallest set carrying a fraction `θ` of `Σ η(T)²`.
    Dorfler,
}

/// Elements with `η(T) > θ max_T η(T)` (strict).
pub fn mark(eta: &[f64], theta: f64) -> Vec<usize> {
    let max = eta.iter().fold(0.0f64, |m, &x| m.max(x));
    if max <= 0.0 {
        return Vec::new();
    }
    let bound = theta * max;
    (0..eta.len()).filter(|&t| eta[t] > bound).collect()
}

/// Smallest set of elements (largest indicators first, ties by id) whose
/// squared indicators sum to at least `θ Σ η(T)²`.
pub fn mark_dorfler(eta: &[f64], theta: f64) -> Vec<usize> {
    let total: f64 = eta.iter().map(|x| x * x).sum();
    if total <= 0.0 {
        return Vec::new();
    }
    let mut order: Vec<usize> = (0..eta.len()).collect();
    order.sort_by(|&a, &b| eta[b].total_cmp(&eta[a]).then(a.cmp(&b)));
    let mut acc = 0.0;
    let mut out = Vec::new();
    for t in order {
        if acc >= theta * total {
            break;
        }
        acc += eta[t] * eta[t];
        out.push(t);
    }
    out.sort_unstable();
    out
}

#[derive(Clone, Copy, Debug)]
pub struct AdaptiveConfig {
    pub theta: f64,
    /// Largest number of computed levels.
    pub max_levels: usize,
    /// Meshes whose `V_h^0` dimension exceeds this are not solved.
    pub max_dofs: usize,
    pub marking: Marking,
}

impl Default for AdaptiveConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            max_levels: 6,
            max_dofs: 50_000,
            marking: Marking::Maximum,
        }
    }
}

impl AdaptiveConfig {
    fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "marking parameter must lie in (0, 1], got {}",
                self.theta
            )));
        }
        if self.max_levels == 0 {
            return Err(Error::InvalidArgument("at least one level is required".into()));
        }
        Ok(())
    }
}

fn deflection_dofs(mesh: &Arc<Mesh>, k: usize) -> Result<usize> {
    Ok(LagrangeSpace::new(Arc::clone(mesh), k)?.num_free())
}

fn at_level(level: usize) -> impl Fn(Error) -> Error {
    move |e| Error::AtLevel {
        level,
        source: Box::new(e),
    }
}

/// Adaptive loop driven by the element-wise `η^eq(T)`. Stops after
/// `max_levels` levels or before the first mesh exceeding `max_dofs`.
pub fn adaptive_loop(
    initial: Mesh,
    disc: &Discretization,
    load: &Load,
    exact: Option<&dyn ExactSolution>,
    config: &AdaptiveConfig,
) -> Result<Vec<LevelResult>> {
    config.validate()?;
    let mut mesh = Arc::new(initial);
    let mut out: Vec<LevelResult> = Vec::new();
    for level in 0..config.max_levels {
        let wrap = at_level(level);
        if level > 0 && deflection_dofs(&mesh, disc.k).map_err(&wrap)? > config.max_dofs {
            break;
        }
        let res = solve_and_estimate(Arc::clone(&mesh), disc, load, exact).map_err(&wrap)?;
        let eta = res.report.eq_indicators();
        out.push(res);
        if level + 1 == config.max_levels {
            break;
        }
        let marked = match config.marking {
            Marking::Maximum => mark(&eta, config.theta),
            Marking::Dorfler => mark_dorfler(&eta, config.theta),
        };
        if marked.is_empty() {
            break;
        }
        mesh = Arc::new(mesh.refine(&marked).map_err(&wrap)?.mesh);
    }
    Ok(out)
}

/// Sequence of uniformly refined meshes (`levels` meshes in total).
pub fn uniform_loop(
    initial: Mesh,
    disc: &Discretization,
    load: &Load,
    exact: Option<&dyn ExactSolution>,
    levels: usize,
) -> Result<Vec<LevelResult>> {
    let mut mesh = Arc::new(initial);
    let mut out = Vec::new();
    for level in 0..levels {
        let wrap = at_level(level);
        out.push(solve_and_estimate(Arc::clone(&mesh), disc, load, exact).map_err(&wrap)?);
        if level + 1 < levels {
            mesh = Arc::new(mesh.refine_uniform().map_err(&wrap)?.mesh);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::BoundarySpec;
    use proptest::prelude::*;

    #[test]
    fn maximum_marking_examples() {
        assert_eq!(mark(&[1.0, 1.0, 1.0, 1.0], 0.25), vec![0, 1, 2, 3]);
        assert_eq!(mark(&[1.0, 0.0, 0.0, 0.0], 0.25), vec![0]);
        assert_eq!(mark(&[4.0, 3.0, 2.0, 1.0], 0.25), vec![0, 1, 2]);
        assert!(mark(&[0.0, 0.0], 0.25).is_empty());
    }

    #[test]
    fn dorfler_marking() {
        assert_eq!(mark_dorfler(&[1.0, 3.0, 2.0], 0.5), vec![1]);
        assert_eq!(mark_dorfler(&[1.0, 3.0, 2.0], 0.8), vec![1, 2]);
        assert!(mark_dorfler(&[0.0], 0.5).is_empty());
    }

    proptest! {
        #[test]
        fn marking_is_scale_invariant(
            eta in proptest::collection::vec(0.0f64..10.0, 1..40),
            s in 1e-3f64..1e3,
        ) {
            let scaled: Vec<f64> = eta.iter().map(|x| s * x).collect();
            prop_assert_eq!(mark(&eta, 0.25), mark(&scaled, 0.25));
        }
    }

    #[test]
    fn rejects_bad_theta() {
        let mesh = Mesh::unit_square(1, &BoundarySpec::clamped()).unwrap();
        let disc = Discretization {
            method: Method::Ipdg,
            k: 2,
            alpha: 9.0,
        };
        let cfg = AdaptiveConfig {
            theta: 0.0,
            ..Default::default()
        };
        assert!(adaptive_loop(mesh, &disc, &Load::zero(), None, &cfg).is_err());
    }

    #[test]
    fn first_level_matches_single_run_and_meshes_are_nested() {
        let mesh = Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap();
        let disc = Discretization {
            method: Method::Ipdg,
            k: 2,
            alpha: 9.0,
        };
        let load = Load::new(|x| 1.0 + 10.0 * x[0] * x[0]);
        let cfg = AdaptiveConfig {
            max_levels: 3,
            ..Default::default()
        };
        let levels = adaptive_loop(mesh.clone(), &disc, &load, None, &cfg).unwrap();
        let single = solve_and_estimate(Arc::new(mesh), &disc, &load, None).unwrap();
        assert_eq!(levels[0].report, single.report);
        for w in levels.windows(2) {
            assert!(w[1].report.dofs > w[0].report.dofs);
            assert!((w[1].mesh.total_area() - w[0].mesh.total_area()).abs() < 1e-12);
            assert!(w[1].mesh.is_conforming());
        }
    }

    #[test]
    fn hhj_pipeline_runs() {
        let mesh = Arc::new(Mesh::unit_square(2, &BoundarySpec::clamped()).unwrap());
        let disc = Discretization {
            method: Method::Hhj,
            k: 2,
            alpha: 9.0,
        };
        let r = solve_and_estimate(mesh, &disc, &Load::constant(1.0), None).unwrap();
        assert!(r.report.eta_eq > 0.0);
        let rep = &r.report;
        assert!(rep.eta_mean <= rep.eta_nonconf + 0.5 * rep.eta_eq + 1e-12);
    }
}
