//! Polynomial bases on the reference triangle and the reference edge.
//!
//! Local shape functions are stored as coefficient vectors over the graded
//! monomials `ξ^a η^b` of the reference triangle `{ξ, η ≥ 0, ξ + η ≤ 1}`.
//! Moment functionals use orthonormal test bases: shifted Legendre
//! polynomials on `[0, 1]` and Gram-Schmidt orthonormalized monomials on the
//! triangle.

use std::sync::OnceLock;

use nalgebra::DMatrix;

use crate::quadrature;

/// Dimension of `P^deg` in two variables; zero for negative degrees.
pub fn dim_p(deg: i32) -> usize {
    if deg < 0 {
        0
    } else {
        let d = deg as usize;
        (d + 1) * (d + 2) / 2
    }
}

/// Exponent pairs `(a, b)` of the graded monomial basis of `P^deg`.
pub fn exponents(deg: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(dim_p(deg as i32));
    for d in 0..=deg {
        for b in 0..=d {
            out.push((d - b, b));
        }
    }
    out
}

/// Values and derivatives (up to order two) of all monomials of a given degree.
#[derive(Clone, Debug, Default)]
pub struct MonomialValues {
    pub val: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dxx: Vec<f64>,
    pub dxy: Vec<f64>,
    pub dyy: Vec<f64>,
}

impl MonomialValues {
    pub fn new(deg: usize) -> Self {
        let n = dim_p(deg as i32);
        Self {
            val: vec![0.0; n],
            dx: vec![0.0; n],
            dy: vec![0.0; n],
            dxx: vec![0.0; n],
            dxy: vec![0.0; n],
            dyy: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.val.len()
    }

    pub fn is_empty(&self) -> bool {
        self.val.is_empty()
    }
}

fn pow_table(x: f64, deg: usize) -> [f64; 24] {
    let mut p = [0.0; 24];
    p[0] = 1.0;
    for i in 1..=deg {
        p[i] = p[i - 1] * x;
    }
    p
}

/// Evaluates every monomial of degree `<= deg` and its first and second
/// derivatives at `(x, y)`.
pub fn eval_monomials(deg: usize, x: f64, y: f64, out: &mut MonomialValues) {
    assert!(deg < 22, "monomial degree too large");
    let px = pow_table(x, deg);
    let py = pow_table(y, deg);
    let mut i = 0;
    for d in 0..=deg {
        for b in 0..=d {
            let a = d - b;
            let fa = a as f64;
            let fb = b as f64;
            out.val[i] = px[a] * py[b];
            out.dx[i] = if a >= 1 { fa * px[a - 1] * py[b] } else { 0.0 };
            out.dy[i] = if b >= 1 { fb * px[a] * py[b - 1] } else { 0.0 };
            out.dxx[i] = if a >= 2 {
                fa * (fa - 1.0) * px[a - 2] * py[b]
            } else {
                0.0
            };
            out.dxy[i] = if a >= 1 && b >= 1 {
                fa * fb * px[a - 1] * py[b - 1]
            } else {
                0.0
            };
            out.dyy[i] = if b >= 2 {
                fb * (fb - 1.0) * px[a] * py[b - 2]
            } else {
                0.0
            };
            i += 1;
        }
    }
}

/// Values of all monomials of degree `<= deg` (no derivatives).
pub fn monomial_values(deg: usize, x: f64, y: f64) -> Vec<f64> {
    let px = pow_table(x, deg);
    let py = pow_table(y, deg);
    let mut out = Vec::with_capacity(dim_p(deg as i32));
    for d in 0..=deg {
        for b in 0..=d {
            out.push(px[d - b] * py[b]);
        }
    }
    out
}

/// Shifted Legendre polynomials `L_0..=L_n` on `[0, 1]`, normalized so that
/// `∫_0^1 L_i L_j ds = δ_ij`.
pub fn legendre01(n: usize, s: f64) -> Vec<f64> {
    let t = 2.0 * s - 1.0;
    let mut p = Vec::with_capacity(n + 1);
    p.push(1.0);
    if n >= 1 {
        p.push(t);
    }
    for j in 2..=n {
        let jf = j as f64;
        let v = ((2.0 * jf - 1.0) * t * p[j - 1] - (jf - 1.0) * p[j - 2]) / jf;
        p.push(v);
    }
    for (j, v) in p.iter_mut().enumerate() {
        *v *= (2.0 * j as f64 + 1.0).sqrt();
    }
    p
}

/// Coefficients (rows = basis functions, columns = monomials) of a basis of
/// `P^deg` orthonormal for the mean inner product `2 ∫_T̂ p q`.
pub fn orthonormal_triangle_basis(deg: usize) -> &'static DMatrix<f64> {
    static CACHE: OnceLock<Vec<DMatrix<f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| (0..=6).map(build_orthonormal).collect());
    &cache[deg]
}

fn build_orthonormal(deg: usize) -> DMatrix<f64> {
    let n = dim_p(deg as i32);
    let rule = quadrature::triangle_rule(2 * deg).expect("degree in range");
    // Gram matrix of monomials for the mean inner product.
    let mut gram = DMatrix::<f64>::zeros(n, n);
    for (p, w) in rule.points.iter().zip(&rule.weights) {
        let m = monomial_values(deg, p[0], p[1]);
        for i in 0..n {
            for j in 0..n {
                gram[(i, j)] += 2.0 * w * m[i] * m[j];
            }
        }
    }
    // Modified Gram-Schmidt in coefficient space.
    let mut coef = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in 0..i {
            let proj = inner(&gram, &coef, i, j);
            for c in 0..n {
                let v = coef[(j, c)];
                coef[(i, c)] -= proj * v;
            }
        }
        let nrm = inner(&gram, &coef, i, i).sqrt();
        for c in 0..n {
            coef[(i, c)] /= nrm;
        }
    }
    coef
}

fn inner(gram: &DMatrix<f64>, coef: &DMatrix<f64>, i: usize, j: usize) -> f64 {
    let n = gram.nrows();
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            s += coef[(i, a)] * gram[(a, b)] * coef[(j, b)];
        }
    }
    s
}
