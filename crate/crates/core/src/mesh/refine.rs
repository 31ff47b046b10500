//! Newest-vertex bisection with conforming closure.

use std::collections::{HashMap, HashSet};

use super::{edge_key, BcKind, Mesh};
use crate::error::{Error, Result};

/// A refined mesh together with the element it descends from.
#[derive(Clone, Debug)]
pub struct Refinement {
    pub mesh: Mesh,
    /// `parent[t]` is the element of the coarse mesh containing child `t`.
    pub parent: Vec<usize>,
}

impl Refinement {
    /// Children of every coarse element.
    pub fn children(&self, coarse_elements: usize) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); coarse_elements];
        for (c, &p) in self.parent.iter().enumerate() {
            out[p].push(c);
        }
        out
    }
}

impl Mesh {
    /// Bisects every marked element (at least once) plus whatever closure
    /// bisections are needed to keep the mesh conforming.
    pub fn refine(&self, marked: &[usize]) -> Result<Refinement> {
        let nt = self.num_triangles();
        if let Some(&bad) = marked.iter().find(|&&t| t >= nt) {
            return Err(Error::InvalidArgument(format!("marked element {bad} does not exist")));
        }

        // Closure: an element with any marked edge must have its refinement
        // edge marked too.
        let mut edge_marked = vec![false; self.num_edges()];
        let mut work: Vec<usize> = Vec::new();
        for &t in marked {
            let e = self.tri_edges[t][0];
            if !edge_marked[e] {
                edge_marked[e] = true;
                work.push(e);
            }
        }
        while let Some(e) = work.pop() {
            let edge = &self.edges[e];
            for t in std::iter::once(edge.left).chain(edge.right) {
                let r = self.tri_edges[t][0];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    work.push(r);
                }
            }
        }

        let mut marked_keys: HashSet<(usize, usize)> = HashSet::new();
        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut tags: HashMap<(usize, usize), BcKind> = HashMap::new();
        for (e, edge) in self.edges.iter().enumerate() {
            let [a, b] = edge.vertices;
            let key = edge_key(a, b);
            if edge_marked[e] {
                marked_keys.insert(key);
                let (pa, pb) = (vertices[a], vertices[b]);
                let m = vertices.len();
                vertices.push([0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]);
                midpoint.insert(key, m);
                if let Some(kind) = edge.boundary {
                    tags.insert(edge_key(a, m), kind);
                    tags.insert(edge_key(m, b), kind);
                }
            } else if let Some(kind) = edge.boundary {
                tags.insert(key, kind);
            }
        }

        let mut triangles = Vec::with_capacity(nt + 2 * marked_keys.len());
        let mut parent = Vec::with_capacity(triangles.capacity());
        for (t, &tri) in self.triangles.iter().enumerate() {
            bisect(tri, &marked_keys, &midpoint, &mut |child| {
                triangles.push(child);
                parent.push(t);
            });
        }
        let mesh = Mesh::with_tags(vertices, triangles, &tags)?;
        Ok(Refinement { mesh, parent })
    }

    /// Bisects every element twice, so that every element is split into four
    /// similar children and the mesh size halves.
    pub fn refine_uniform(&self) -> Result<Refinement> {
        let all: Vec<usize> = (0..self.num_triangles()).collect();
        let first = self.refine(&all)?;
        let all: Vec<usize> = (0..first.mesh.num_triangles()).collect();
        let second = first.mesh.refine(&all)?;
        let parent = second.parent.iter().map(|&p| first.parent[p]).collect();
        Ok(Refinement {
            mesh: second.mesh,
            parent,
        })
    }
}

fn bisect(
    tri: [usize; 3],
    marked: &HashSet<(usize, usize)>,
    midpoint: &HashMap<(usize, usize), usize>,
    emit: &mut impl FnMut([usize; 3]),
) {
    let [a, b, c] = tri;
    let key = edge_key(b, c);
    if !marked.contains(&key) {
        emit(tri);
        return;
    }
    let m = midpoint[&key];
    bisect([m, a, b], marked, midpoint, emit);
    bisect([m, c, a], marked, midpoint, emit);
}
