//! A discrete overkill solution on a structured square mesh used in place of
//! an exact solution.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::mesh::Mesh;
use crate::problem::{element_rule, ElementRule, ExactSolution};
use crate::quadrature;
use crate::spaces::{Jet2, ScalarField};

/// A deflection on `Mesh::unit_square(n, _)`, evaluated by structured point
/// location.
#[derive(Clone, Debug)]
pub struct ReferenceSolution {
    pub n: usize,
    pub field: ScalarField,
}

impl ReferenceSolution {
    pub fn new(n: usize, field: ScalarField) -> Result<Self> {
        if field.mesh().num_triangles() != 2 * n * n {
            return Err(Error::InvalidArgument(format!(
                "reference field is not on the structured {n}x{n} square mesh"
            )));
        }
        Ok(Self { n, field })
    }

    fn mesh(&self) -> &Arc<Mesh> {
        self.field.mesh()
    }

    /// Cell `(i, j)` containing `x` (clamped to the grid).
    fn cell(&self, x: Point) -> (usize, usize) {
        let n = self.n as f64;
        let c = |v: f64| ((v * n).floor().max(0.0) as usize).min(self.n - 1);
        (c(x[0]), c(x[1]))
    }

    /// Triangle containing `x`: the lower-right triangle of a cell lies below
    /// its diagonal `x - x0 = y - y0`.
    pub fn locate(&self, x: Point) -> usize {
        let (i, j) = self.cell(x);
        let h = 1.0 / self.n as f64;
        let (dx, dy) = (x[0] - i as f64 * h, x[1] - j as f64 * h);
        let base = 2 * (j * self.n + i);
        if dx > dy {
            base
        } else {
            base + 1
        }
    }
}

impl ExactSolution for ReferenceSolution {
    fn jet(&self, x: Point) -> Jet2 {
        let t = self.locate(x);
        let xi = self.mesh().affine(t).to_reference(x);
        self.field.eval(t, xi)
    }

    /// On meshes whose elements are unions of reference cells the rule is a
    /// composite rule over those cells, so that the piecewise reference is
    /// integrated exactly. Otherwise an elevated rule on `t` is used.
    fn error_rule(&self, mesh: &Mesh, t: usize, deg: usize) -> Result<ElementRule> {
        let fine = self.mesh();
        let map = mesh.affine(t);
        let tri = mesh.triangle(t);
        let pts = tri.map(|v| mesh.vertex(v));
        let lo = [0, 1].map(|c| pts.iter().map(|p| p[c]).fold(f64::INFINITY, f64::min));
        let hi = [0, 1].map(|c| pts.iter().map(|p| p[c]).fold(f64::NEG_INFINITY, f64::max));
        let eps = 1e-12;
        let (i0, j0) = self.cell([lo[0] + eps, lo[1] + eps]);
        let (i1, j1) = self.cell([hi[0] - eps, hi[1] - eps]);
        let rule = quadrature::triangle_rule((2 * deg.max(self.field.space.degree())).min(quadrature::MAX_DEGREE))?;
        let mut out = ElementRule::default();
        let mut covered = 0.0;
        for j in j0..=j1 {
            for i in i0..=i1 {
                for ft in [2 * (j * self.n + i), 2 * (j * self.n + i) + 1] {
                    let c = map.to_reference(fine.centroid(ft));
                    if c[0] < -eps || c[1] < -eps || c[0] + c[1] > 1.0 + eps {
                        continue;
                    }
                    let fmap = fine.affine(ft);
                    let scale = 2.0 * fine.area(ft);
                    covered += fine.area(ft);
                    for (p, w) in rule.points.iter().zip(&rule.weights) {
                        out.points.push(map.to_reference(fmap.to_physical(*p)));
                        out.weights.push(w * scale);
                    }
                }
            }
        }
        if (covered - mesh.area(t)).abs() > 1e-10 * mesh.area(t) {
            return element_rule(mesh, t, 2 * deg + 4, None, 0);
        }
        Ok(out)
    }
}
