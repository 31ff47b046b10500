//! Gauss rules on the reference edge `[0, 1]` and the reference triangle
//! `{ξ, η ≥ 0, ξ + η ≤ 1}`.
//!
//! Triangle rules are collapsed (Duffy) tensor products of Gauss-Legendre
//! rules. All weights are positive and no node sits on a vertex; the
//! collapsed vertex is reference vertex 0, which lets callers place it on a
//! point singularity by permuting barycentric coordinates.

use std::sync::OnceLock;

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 20;

/// A quadrature rule. For edge rules only the first coordinate of each point
/// is used.
#[derive(Clone, Debug)]
pub struct QuadRule {
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre01(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, z);
            dp = d;
            let dz = p / d;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, z);
        if d != 0.0 {
            dp = d;
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}

fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for j in 2..=n {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let dp = nf * (z * p1 - p0) / (z * z - 1.0);
    (p1, dp)
}

/// Rule on `[0, 1]` exact for polynomials of degree `<= d`.
pub fn edge_rule(d: usize) -> Result<&'static QuadRule> {
    static RULES: OnceLock<Vec<QuadRule>> = OnceLock::new();
    if d > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(d));
    }
    let rules = RULES.get_or_init(|| {
        (0..=MAX_DEGREE)
            .map(|deg| {
                let (x, w) = gauss_legendre01(deg / 2 + 1);
                QuadRule {
                    points: x.into_iter().map(|s| [s, 0.0]).collect(),
                    weights: w,
                    degree: deg,
                }
            })
            .collect()
    });
    Ok(&rules[d])
}

/// Rule on the reference triangle exact for polynomials of total degree `<= d`.
pub fn triangle_rule(d: usize) -> Result<&'static QuadRule> {
    static RULES: OnceLock<Vec<QuadRule>> = OnceLock::new();
    if d > MAX_DEGREE {
        return Err(Error::UnsupportedDegree(d));
    }
    let rules = RULES.get_or_init(|| (0..=MAX_DEGREE).map(collapsed_rule).collect());
    Ok(&rules[d])
}

fn collapsed_rule(d: usize) -> QuadRule {
    // The Duffy Jacobian adds one degree in the radial direction.
    let (rs, rw) = gauss_legendre01((d + 2).div_ceil(2));
    let (ts, tw) = gauss_legendre01(d / 2 + 1);
    let mut points = Vec::with_capacity(rs.len() * ts.len());
    let mut weights = Vec::with_capacity(rs.len() * ts.len());
    for (s, ws) in rs.iter().zip(&rw) {
        for (t, wt) in ts.iter().zip(&tw) {
            points.push([s * (1.0 - t), s * t]);
            weights.push(ws * wt * s);
        }
    }
    QuadRule {
        points,
        weights,
        degree: d,
    }
}

/// Barycentric coordinates of a reference point, with the collapsed vertex of
/// the rule moved to local vertex `apex`.
#[inline]
pub fn barycentric_with_apex(p: [f64; 2], apex: usize) -> [f64; 3] {
    let l = [1.0 - p[0] - p[1], p[0], p[1]];
    match apex {
        0 => l,
        1 => [l[2], l[0], l[1]],
        _ => [l[1], l[2], l[0]],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: usize) -> f64 {
        (1..=n).map(|i| i as f64).product()
    }

    #[test]
    fn triangle_examples() {
        let r = triangle_rule(5).unwrap();
        let integrate = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
            r.points
                .iter()
                .zip(&r.weights)
                .map(|(p, w)| w * f(p[0], p[1]))
                .sum()
        };
        assert!((integrate(&|_, _| 1.0) - 0.5).abs() < 1e-15);
        assert!((integrate(&|x, y| x * y) - 1.0 / 24.0).abs() < 1e-15);
        assert!((integrate(&|x, y| x * x * y.powi(3)) - 1.0 / 420.0).abs() < 1e-15);
    }

    #[test]
    fn edge_examples() {
        let r = edge_rule(6).unwrap();
        let integrate = |f: &dyn Fn(f64) -> f64| -> f64 {
            r.points.iter().zip(&r.weights).map(|(p, w)| w * f(p[0])).sum()
        };
        assert!((integrate(&|_| 1.0) - 1.0).abs() < 1e-15);
        assert!((integrate(&|s| s.powi(3)) - 0.25).abs() < 1e-15);
        assert!((integrate(&|s| s.powi(6)) - 1.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn monomial_exactness_sweep() {
        for d in 0..=MAX_DEGREE {
            let tri = triangle_rule(d).unwrap();
            assert!(tri.weights.iter().all(|&w| w > 0.0));
            for deg in 0..=d {
                for b in 0..=deg {
                    let a = deg - b;
                    let exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                    let got: f64 = tri
                        .points
                        .iter()
                        .zip(&tri.weights)
                        .map(|(p, w)| w * p[0].powi(a as i32) * p[1].powi(b as i32))
                        .sum();
                    assert!(
                        ((got - exact) / exact).abs() < 1e-13,
                        "degree {d}: x^{a} y^{b}: {got} vs {exact}"
                    );
                }
            }
            let edge = edge_rule(d).unwrap();
            assert!(edge.weights.iter().all(|&w| w > 0.0));
            for m in 0..=d {
                let got: f64 = edge
                    .points
                    .iter()
                    .zip(&edge.weights)
                    .map(|(p, w)| w * p[0].powi(m as i32))
                    .sum();
                let exact = 1.0 / (m as f64 + 1.0);
                assert!(((got - exact) / exact).abs() < 1e-13, "edge degree {d}, s^{m}");
            }
        }
    }

    #[test]
    fn out_of_range_degree_rejected() {
        assert!(matches!(triangle_rule(21), Err(Error::UnsupportedDegree(21))));
        assert!(matches!(edge_rule(99), Err(Error::UnsupportedDegree(99))));
    }

    #[test]
    fn no_node_on_a_vertex() {
        let r = triangle_rule(MAX_DEGREE).unwrap();
        for p in &r.points {
            let l = barycentric_with_apex(*p, 0);
            assert!(l.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }
}
