//! Conforming triangulations with globally oriented edges.
//!
//! Triangles are stored counter-clockwise. The first vertex of every triangle
//! is its *newest vertex*: the opposite edge (local edge 0) is the refinement
//! edge used by newest-vertex bisection.
//!
//! Local edge `i` of a triangle is opposite local vertex `i` and runs from
//! vertex `i+1` to vertex `i+2` (mod 3). An interior edge is oriented from
//! its smaller to its larger vertex id; its left element `T1` traverses it in
//! that direction. A boundary edge is oriented along its only triangle. The
//! edge normal is the outward normal of `T1` and the edge tangent is that
//! normal rotated by π/2, i.e. the direction `V1 → V2`.

mod io;
mod refine;

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{norm, sub, AffineMap, Point};

pub use refine::Refinement;

/// Boundary condition carried by a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BcKind {
    /// `u = 0`, `∂n u = 0`
    Clamped,
    /// `u = 0`, `σ_nn = 0`
    SimplySupported,
    /// `σ_nn = 0`, vanishing shear force
    Free,
}

impl BcKind {
    pub fn tag(self) -> char {
        match self {
            BcKind::Clamped => 'C',
            BcKind::SimplySupported => 'S',
            BcKind::Free => 'F',
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "C" => Some(BcKind::Clamped),
            "S" => Some(BcKind::SimplySupported),
            "F" => Some(BcKind::Free),
            _ => None,
        }
    }

    /// Deflection is an essential condition (`u = 0`).
    pub fn fixes_deflection(self) -> bool {
        matches!(self, BcKind::Clamped | BcKind::SimplySupported)
    }

    /// Normal slope is prescribed (`∂n u = 0`).
    pub fn fixes_slope(self) -> bool {
        matches!(self, BcKind::Clamped)
    }

    /// Normal-normal moment is prescribed (`σ_nn = 0`).
    pub fn fixes_moment(self) -> bool {
        matches!(self, BcKind::SimplySupported | BcKind::Free)
    }
}

/// Assignment of boundary conditions to straight boundary segments.
///
/// A boundary edge takes the kind of the first segment that contains both of
/// its end points, and the default kind otherwise.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundarySpec {
    default: BcKind,
    segments: Vec<(Point, Point, BcKind)>,
}

impl Default for BoundarySpec {
    fn default() -> Self {
        Self::uniform(BcKind::Clamped)
    }
}

impl BoundarySpec {
    pub fn uniform(kind: BcKind) -> Self {
        Self {
            default: kind,
            segments: Vec::new(),
        }
    }

    pub fn clamped() -> Self {
        Self::default()
    }

    pub fn with_segment(mut self, a: Point, b: Point, kind: BcKind) -> Self {
        self.segments.push((a, b, kind));
        self
    }

    pub fn kind_of_edge(&self, a: Point, b: Point) -> BcKind {
        for &(p, q, kind) in &self.segments {
            if on_segment(a, p, q) && on_segment(b, p, q) {
                return kind;
            }
        }
        self.default
    }
}

fn on_segment(x: Point, p: Point, q: Point) -> bool {
    let d = sub(q, p);
    let len = norm(d);
    let r = sub(x, p);
    let tol = 1e-10 * len.max(1.0);
    let cross = d[0] * r[1] - d[1] * r[0];
    if (cross / len).abs() > tol {
        return false;
    }
    let s = (d[0] * r[0] + d[1] * r[1]) / (len * len);
    (-1e-10..=1.0 + 1e-10).contains(&s)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    /// `[V1, V2]`
    pub vertices: [usize; 2],
    /// `T1`, the element on the left of `V1 → V2`.
    pub left: usize,
    /// `T2`; `None` on the boundary.
    pub right: Option<usize>,
    pub boundary: Option<BcKind>,
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.right.is_some()
    }

    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// An immutable conforming triangulation.
#[derive(Clone, Debug)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    tri_edges: Vec<[usize; 3]>,
    area: Vec<f64>,
    diameter: Vec<f64>,
    edge_length: Vec<f64>,
}

pub(crate) fn edge_key(a: usize, b: usize) -> (usize, usize) {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

impl Mesh {
    /// Builds a mesh, tagging boundary edges through `spec`.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>, spec: &BoundarySpec) -> Result<Self> {
        let verts = vertices.clone();
        Self::build(vertices, triangles, |a, b| spec.kind_of_edge(verts[a], verts[b]))
    }

    /// Builds a mesh from explicit boundary tags keyed by vertex pairs
    /// (either order). Untagged boundary edges default to clamped.
    pub fn with_tags(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tags: &HashMap<(usize, usize), BcKind>,
    ) -> Result<Self> {
        Self::build(vertices, triangles, |a, b| {
            tags.get(&edge_key(a, b)).copied().unwrap_or(BcKind::Clamped)
        })
    }

    fn build(
        vertices: Vec<Point>,
        triangles: Vec<[usize; 3]>,
        tag: impl Fn(usize, usize) -> BcKind,
    ) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        let mut area = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing vertex")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} is degenerate")));
            }
            let map = AffineMap::new(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
            if map.det <= 0.0 {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} has non-positive signed area"
                )));
            }
            area.push(0.5 * map.det);
        }

        // (directed use count) per undirected edge: (T traversing min->max, T traversing max->min)
        let mut slots: HashMap<(usize, usize), (Option<usize>, Option<usize>)> = HashMap::new();
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let entry = slots.entry(edge_key(a, b)).or_insert((None, None));
                let slot = if a < b { &mut entry.0 } else { &mut entry.1 };
                if slot.is_some() {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({a}, {b}) is used twice in the same direction or by more than two triangles"
                    )));
                }
                *slot = Some(t);
            }
        }

        let mut keys: Vec<(usize, usize)> = slots.keys().copied().collect();
        keys.sort_unstable();
        let mut index = HashMap::with_capacity(keys.len());
        let mut edges = Vec::with_capacity(keys.len());
        let mut edge_length = Vec::with_capacity(keys.len());
        for key in keys {
            let (fwd, bwd) = slots[&key];
            let edge = match (fwd, bwd) {
                (Some(l), Some(r)) => Edge {
                    vertices: [key.0, key.1],
                    left: l,
                    right: Some(r),
                    boundary: None,
                },
                (Some(l), None) => Edge {
                    vertices: [key.0, key.1],
                    left: l,
                    right: None,
                    boundary: Some(tag(key.0, key.1)),
                },
                (None, Some(l)) => Edge {
                    vertices: [key.1, key.0],
                    left: l,
                    right: None,
                    boundary: Some(tag(key.0, key.1)),
                },
                (None, None) => unreachable!(),
            };
            index.insert(key, edges.len());
            edge_length.push(norm(sub(vertices[key.1], vertices[key.0])));
            edges.push(edge);
        }

        let tri_edges: Vec<[usize; 3]> = triangles
            .iter()
            .map(|tri| {
                let mut out = [0; 3];
                for (i, slot) in out.iter_mut().enumerate() {
                    *slot = index[&edge_key(tri[(i + 1) % 3], tri[(i + 2) % 3])];
                }
                out
            })
            .collect();
        let diameter = tri_edges
            .iter()
            .map(|te| te.iter().map(|&e| edge_length[e]).fold(0.0, f64::max))
            .collect();

        let mesh = Self {
            vertices,
            triangles,
            edges,
            tri_edges,
            area,
            diameter,
            edge_length,
        };
        mesh.check_no_hanging_nodes()?;
        Ok(mesh)
    }

    fn check_no_hanging_nodes(&self) -> Result<()> {
        // A hanging node shows up as a vertex lying strictly inside an edge
        // that has only one neighbouring triangle.
        let bedges: Vec<usize> = (0..self.edges.len())
            .filter(|&e| self.edges[e].right.is_none())
            .collect();
        if bedges.is_empty() {
            return Ok(());
        }
        let h = bedges.iter().map(|&e| self.edge_length[e]).sum::<f64>() / bedges.len() as f64;
        let cell = |p: Point| ((p[0] / h).floor() as i64, (p[1] / h).floor() as i64);
        let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        let mut bverts: Vec<usize> = bedges.iter().flat_map(|&e| self.edges[e].vertices).collect();
        bverts.sort_unstable();
        bverts.dedup();
        for &v in &bverts {
            grid.entry(cell(self.vertices[v])).or_default().push(v);
        }
        for &e in &bedges {
            let [a, b] = self.edges[e].vertices;
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let (ca, cb) = (cell(pa), cell(pb));
            for i in ca.0.min(cb.0) - 1..=ca.0.max(cb.0) + 1 {
                for j in ca.1.min(cb.1) - 1..=ca.1.max(cb.1) + 1 {
                    let Some(list) = grid.get(&(i, j)) else { continue };
                    for &v in list {
                        if v == a || v == b {
                            continue;
                        }
                        let x = self.vertices[v];
                        let d = sub(pb, pa);
                        let r = sub(x, pa);
                        let len2 = d[0] * d[0] + d[1] * d[1];
                        let s = (d[0] * r[0] + d[1] * r[1]) / len2;
                        let cross = (d[0] * r[1] - d[1] * r[0]).abs() / len2.sqrt();
                        if s > 1e-9 && s < 1.0 - 1e-9 && cross < 1e-9 * len2.sqrt() {
                            return Err(Error::InvalidMesh(format!(
                                "hanging node {v} on edge ({a}, {b})"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Structured mesh of `(0,1)^2` with `2 n^2` right isosceles triangles.
    pub fn unit_square(n: usize, spec: &BoundarySpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
        }
        let h = 1.0 / n as f64;
        let id = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let mut triangles = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                push_cell(&mut triangles, id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            }
        }
        Self::new(vertices, triangles, spec)
    }

    /// Structured mesh of the L-shaped domain `(-1,1)^2 \ [0,1) x (-1,0]`
    /// with `6 n^2` triangles; the re-entrant corner is at the origin.
    pub fn l_shape(n: usize, spec: &BoundarySpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("subdivision count must be >= 1".into()));
        }
        let m = 2 * n;
        let h = 1.0 / n as f64;
        let inside = |i: usize, j: usize| !(i >= n && j < n);
        let mut id = vec![usize::MAX; (m + 1) * (m + 1)];
        let mut vertices = Vec::new();
        for j in 0..=m {
            for i in 0..=m {
                // A grid point is used when it touches a retained cell.
                let used = (i.saturating_sub(1)..=i.min(m - 1))
                    .any(|ci| (j.saturating_sub(1)..=j.min(m - 1)).any(|cj| inside(ci, cj)));
                if used {
                    id[j * (m + 1) + i] = vertices.len();
                    vertices.push([-1.0 + i as f64 * h, -1.0 + j as f64 * h]);
                }
            }
        }
        let g = |i: usize, j: usize| id[j * (m + 1) + i];
        let mut triangles = Vec::with_capacity(6 * n * n);
        for j in 0..m {
            for i in 0..m {
                if inside(i, j) {
                    push_cell(&mut triangles, g(i, j), g(i + 1, j), g(i + 1, j + 1), g(i, j + 1));
                }
            }
        }
        Self::new(vertices, triangles, spec)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> Point {
        self.vertices[v]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, t: usize) -> [usize; 3] {
        self.triangles[t]
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> &Edge {
        &self.edges[e]
    }

    /// Global edge ids of the local edges of `t` (edge `i` opposite vertex `i`).
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.tri_edges[t]
    }

    /// Whether `t` traverses its local edge `i` in the global direction,
    /// i.e. whether `t` is the left element of that edge.
    pub fn is_left(&self, t: usize, local: usize) -> bool {
        self.edges[self.tri_edges[t][local]].left == t
    }

    pub fn area(&self, t: usize) -> f64 {
        self.area[t]
    }

    /// Element diameter `h_T` (longest edge).
    pub fn diameter(&self, t: usize) -> f64 {
        self.diameter[t]
    }

    /// Edge length `h_E`.
    pub fn edge_length(&self, e: usize) -> f64 {
        self.edge_length[e]
    }

    pub fn max_diameter(&self) -> f64 {
        self.diameter.iter().copied().fold(0.0, f64::max)
    }

    pub fn affine(&self, t: usize) -> AffineMap {
        let [a, b, c] = self.triangles[t];
        AffineMap::new(self.vertices[a], self.vertices[b], self.vertices[c])
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.triangles[t];
        let (pa, pb, pc) = (self.vertices[a], self.vertices[b], self.vertices[c]);
        [(pa[0] + pb[0] + pc[0]) / 3.0, (pa[1] + pb[1] + pc[1]) / 3.0]
    }

    /// Unit tangent `V1 → V2`.
    pub fn edge_tangent(&self, e: usize) -> Point {
        let [a, b] = self.edges[e].vertices;
        let d = sub(self.vertices[b], self.vertices[a]);
        let l = self.edge_length[e];
        [d[0] / l, d[1] / l]
    }

    /// Unit normal of the edge: the outward normal of its left element.
    pub fn edge_normal(&self, e: usize) -> Point {
        let t = self.edge_tangent(e);
        [t[1], -t[0]]
    }

    /// Point on the edge at parameter `s ∈ [0,1]` measured from `V1`.
    pub fn edge_point(&self, e: usize, s: f64) -> Point {
        let [a, b] = self.edges[e].vertices;
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]
    }

    pub fn boundary_kind(&self, e: usize) -> Option<BcKind> {
        self.edges[e].boundary
    }

    /// Boundary kinds of all boundary edges incident to each vertex.
    pub fn vertex_boundary_kinds(&self) -> Vec<Vec<(usize, BcKind)>> {
        let mut out = vec![Vec::new(); self.vertices.len()];
        for (e, edge) in self.edges.iter().enumerate() {
            if let Some(kind) = edge.boundary {
                for &v in &edge.vertices {
                    out[v].push((e, kind));
                }
            }
        }
        out
    }

    /// Vertices where the deflection is fixed (on a clamped or simply
    /// supported edge).
    pub fn deflection_fixed_vertices(&self) -> Vec<bool> {
        let mut fixed = vec![false; self.vertices.len()];
        for edge in &self.edges {
            if edge.boundary.is_some_and(BcKind::fixes_deflection) {
                fixed[edge.vertices[0]] = true;
                fixed[edge.vertices[1]] = true;
            }
        }
        fixed
    }

    /// Edge-neighbours of `t`.
    pub fn neighbors(&self, t: usize) -> Vec<usize> {
        self.tri_edges[t]
            .iter()
            .filter_map(|&e| {
                let edge = &self.edges[e];
                match edge.right {
                    Some(r) if edge.left == t => Some(r),
                    Some(_) => Some(edge.left),
                    None => None,
                }
            })
            .collect()
    }

    /// Every interior edge has two triangles, every boundary edge one, and the
    /// edge normal points from `T1` into `T2`.
    pub fn is_conforming(&self) -> bool {
        self.edges.iter().enumerate().all(|(e, edge)| {
            let Some(r) = edge.right else {
                return edge.boundary.is_some();
            };
            let n = self.edge_normal(e);
            let mid = self.edge_point(e, 0.5);
            let into_right = sub(self.centroid(r), mid);
            let into_left = sub(self.centroid(edge.left), mid);
            n[0] * into_right[0] + n[1] * into_right[1] > 0.0
                && n[0] * into_left[0] + n[1] * into_left[1] < 0.0
        }) && self.check_no_hanging_nodes().is_ok()
    }

    /// Number of boundary loops minus one appears in `V - E + T`; this returns
    /// the Euler characteristic.
    pub fn euler_characteristic(&self) -> i64 {
        self.vertices.len() as i64 - self.edges.len() as i64 + self.triangles.len() as i64
    }

    /// A copy in which interior edge `e` is stored with the opposite
    /// orientation (`V1 ↔ V2`, `T1 ↔ T2`).
    pub fn with_flipped_edge(&self, e: usize) -> Result<Self> {
        let edge = &self.edges[e];
        let Some(right) = edge.right else {
            return Err(Error::InvalidArgument(format!("edge {e} is a boundary edge")));
        };
        let mut out = self.clone();
        out.edges[e] = Edge {
            vertices: [edge.vertices[1], edge.vertices[0]],
            left: right,
            right: Some(edge.left),
            boundary: None,
        };
        Ok(out)
    }

    pub fn total_area(&self) -> f64 {
        self.area.iter().sum()
    }
}

/// Splits the cell `(p00, p10, p11, p01)` along the diagonal `p00 - p11`; the
/// right-angle vertex comes first so that the hypotenuse is the refinement
/// edge.
fn push_cell(tris: &mut Vec<[usize; 3]>, p00: usize, p10: usize, p11: usize, p01: usize) {
    tris.push([p10, p11, p00]);
    tris.push([p01, p00, p11]);
}
