//! Plain-text mesh files.
//!
//! ```text
//! # comment
//! VERTICES 4
//! 0 0
//! 1 0
//! 1 1
//! 0 1
//! TRIANGLES 2
//! 1 2 0
//! 3 0 2
//! BOUNDARY 4
//! 0 1 C
//! 1 2 S
//! 2 3 F
//! 3 0 C
//! ```
//!
//! Triangles list their newest vertex first. Boundary edges that are not
//! listed are clamped.

use std::collections::HashMap;
use std::fmt::Write as _;

use super::{edge_key, BcKind, Mesh};
use crate::error::{Error, Result};

impl Mesh {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "VERTICES {}", self.vertices.len());
        for p in &self.vertices {
            let _ = writeln!(s, "{} {}", p[0], p[1]);
        }
        let _ = writeln!(s, "TRIANGLES {}", self.triangles.len());
        for t in &self.triangles {
            let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
        }
        let boundary: Vec<_> = self.edges.iter().filter(|e| e.boundary.is_some()).collect();
        let _ = writeln!(s, "BOUNDARY {}", boundary.len());
        for e in boundary {
            let kind = e.boundary.expect("filtered");
            let _ = writeln!(s, "{} {} {}", e.vertices[0], e.vertices[1], kind.tag());
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Mesh> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());

        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut tags = HashMap::new();
        let mut seen = [false; 3];
        while let Some((line, header)) = lines.next() {
            let mut parts = header.split_whitespace();
            let section = parts.next().unwrap_or("");
            let count: usize = parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| parse_err(line, "expected a section header with a count"))?;
            if parts.next().is_some() {
                return Err(parse_err(line, "trailing tokens after section header"));
            }
            let slot = match section {
                "VERTICES" => 0,
                "TRIANGLES" => 1,
                "BOUNDARY" => 2,
                other => return Err(parse_err(line, &format!("unknown section {other:?}"))),
            };
            if std::mem::replace(&mut seen[slot], true) {
                return Err(parse_err(line, &format!("duplicate section {section}")));
            }
            for _ in 0..count {
                let (line, body) = lines
                    .next()
                    .ok_or_else(|| parse_err(line, &format!("section {section} ends early")))?;
                let tok: Vec<&str> = body.split_whitespace().collect();
                match slot {
                    0 => {
                        let [x, y] = tok[..] else {
                            return Err(parse_err(line, "expected `x y`"));
                        };
                        vertices.push([number::<f64>(line, x)?, number::<f64>(line, y)?]);
                    }
                    1 => {
                        let [a, b, c] = tok[..] else {
                            return Err(parse_err(line, "expected `v0 v1 v2`"));
                        };
                        triangles.push([
                            number::<usize>(line, a)?,
                            number::<usize>(line, b)?,
                            number::<usize>(line, c)?,
                        ]);
                    }
                    _ => {
                        let [a, b, tag] = tok[..] else {
                            return Err(parse_err(line, "expected `v_a v_b TAG`"));
                        };
                        let kind = BcKind::from_tag(tag)
                            .ok_or_else(|| parse_err(line, &format!("unknown boundary tag {tag:?}")))?;
                        tags.insert(edge_key(number(line, a)?, number(line, b)?), kind);
                    }
                }
            }
        }
        if !seen[0] || !seen[1] {
            return Err(parse_err(0, "VERTICES and TRIANGLES sections are required"));
        }
        let mesh = Mesh::with_tags(vertices, triangles, &tags)?;
        for &(a, b) in tags.keys() {
            let is_boundary = mesh
                .edges
                .iter()
                .any(|e| e.right.is_none() && edge_key(e.vertices[0], e.vertices[1]) == (a, b));
            if !is_boundary {
                return Err(Error::InvalidMesh(format!("tagged edge ({a}, {b}) is not a boundary edge")));
            }
        }
        Ok(mesh)
    }
}

fn parse_err(line: usize, msg: &str) -> Error {
    Error::MeshParse {
        line,
        msg: msg.to_string(),
    }
}

fn number<T: std::str::FromStr>(line: usize, tok: &str) -> Result<T> {
    tok.parse()
        .map_err(|_| parse_err(line, &format!("cannot parse {tok:?}")))
}
