//! Loads, exact solutions and the quadrature used to integrate them.

use std::sync::Arc;

use crate::error::Result;
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::quadrature::{self, barycentric_with_apex, MAX_DEGREE};
use crate::spaces::Jet2;

/// Quadrature points of one element: reference coordinates and physical
/// weights.
#[derive(Clone, Debug, Default)]
pub struct ElementRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
}

/// Rule of degree `deg` on element `t`. If `singular` is a vertex of `t`,
/// the collapsed vertex of the rule is placed on it and the degree is raised
/// by `elevate`.
pub fn element_rule(
    mesh: &Mesh,
    t: usize,
    deg: usize,
    singular: Option<Point>,
    elevate: usize,
) -> Result<ElementRule> {
    let apex = singular.and_then(|p| {
        mesh.triangle(t).iter().position(|&v| {
            let x = mesh.vertex(v);
            (x[0] - p[0]).abs() < 1e-14 && (x[1] - p[1]).abs() < 1e-14
        })
    });
    let deg = match apex {
        Some(_) => (deg + elevate).min(MAX_DEGREE),
        None => deg.min(MAX_DEGREE),
    };
    let rule = quadrature::triangle_rule(deg)?;
    let scale = 2.0 * mesh.area(t);
    let points = rule
        .points
        .iter()
        .map(|p| {
            let l = barycentric_with_apex(*p, apex.unwrap_or(0));
            [l[1], l[2]]
        })
        .collect();
    Ok(ElementRule {
        points,
        weights: rule.weights.iter().map(|w| w * scale).collect(),
    })
}

/// A pointwise load `f`, optionally with a point singularity that calls for
/// elevated quadrature on the elements touching it.
#[derive(Clone)]
pub struct Load {
    func: Arc<dyn Fn(Point) -> f64 + Send + Sync>,
    singular: Option<Point>,
    constant: Option<f64>,
}

impl std::fmt::Debug for Load {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Load")
            .field("singular", &self.singular)
            .field("constant", &self.constant)
            .finish_non_exhaustive()
    }
}

impl Load {
    pub fn new(f: impl Fn(Point) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            func: Arc::new(f),
            singular: None,
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            func: Arc::new(move |_| c),
            singular: None,
            constant: Some(c),
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn with_singularity(mut self, p: Point) -> Self {
        self.singular = Some(p);
        self
    }

    pub fn singularity(&self) -> Option<Point> {
        self.singular
    }

    /// Scales the load by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let f = Arc::clone(&self.func);
        Self {
            func: Arc::new(move |x| s * f(x)),
            singular: self.singular,
            constant: self.constant.map(|c| s * c),
        }
    }

    #[inline]
    pub fn eval(&self, x: Point) -> f64 {
        (self.func)(x)
    }

    pub fn is_zero(&self) -> bool {
        self.constant == Some(0.0)
    }

    /// Quadrature for load integrals against degree-`k` functions: degree
    /// `2k+6`, or `2k+10` on elements touching the singularity.
    pub fn rule(&self, mesh: &Mesh, t: usize, k: usize) -> Result<ElementRule> {
        element_rule(mesh, t, 2 * k + 6, self.singular, 4)
    }

    /// `‖f‖_{0,Ω}`.
    pub fn l2_norm(&self, mesh: &Mesh, k: usize) -> Result<f64> {
        let mut s = 0.0;
        for t in 0..mesh.num_triangles() {
            let r = self.rule(mesh, t, k)?;
            let map = mesh.affine(t);
            for (p, w) in r.points.iter().zip(&r.weights) {
                s += w * self.eval(map.to_physical(*p)).powi(2);
            }
        }
        Ok(s.sqrt())
    }
}

/// A known solution with derivatives up to second order.
pub trait ExactSolution: Send + Sync {
    /// Value, gradient and Hessian at a physical point.
    fn jet(&self, x: Point) -> Jet2;

    /// Quadrature on element `t` of `mesh` suitable for integrating the
    /// squared difference between this solution and a polynomial of degree
    /// `deg`.
    fn error_rule(&self, mesh: &Mesh, t: usize, deg: usize) -> Result<ElementRule>;
}

/// A closed-form solution, optionally singular at one point.
#[derive(Clone)]
pub struct ClosedForm {
    jet: Arc<dyn Fn(Point) -> Jet2 + Send + Sync>,
    singular: Option<Point>,
}

impl ClosedForm {
    pub fn new(jet: impl Fn(Point) -> Jet2 + Send + Sync + 'static, singular: Option<Point>) -> Self {
        Self {
            jet: Arc::new(jet),
            singular,
        }
    }
}

impl ExactSolution for ClosedForm {
    fn jet(&self, x: Point) -> Jet2 {
        (self.jet)(x)
    }

    fn error_rule(&self, mesh: &Mesh, t: usize, deg: usize) -> Result<ElementRule> {
        element_rule(mesh, t, 2 * deg + 4, self.singular, 8)
    }
}
