//! Affine element maps and small tensor helpers.

pub type Point = [f64; 2];

/// Symmetric 2x2 tensor stored as `[xx, xy, yy]`.
pub type Sym = [f64; 3];

/// Frobenius product `a : b` of two symmetric tensors.
#[inline]
pub fn ddot(a: &Sym, b: &Sym) -> f64 {
    a[0] * b[0] + 2.0 * a[1] * b[1] + a[2] * b[2]
}

/// `n^T a m`.
#[inline]
pub fn contract(a: &Sym, n: Point, m: Point) -> f64 {
    n[0] * (a[0] * m[0] + a[1] * m[1]) + n[1] * (a[1] * m[0] + a[2] * m[1])
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn norm(a: Point) -> f64 {
    a[0].hypot(a[1])
}

/// Counter-clockwise rotation by π/2.
#[inline]
pub fn rot90(a: Point) -> Point {
    [-a[1], a[0]]
}

/// The affine map `x = origin + J ξ` from the reference triangle onto a
/// physical triangle.
#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub origin: Point,
    /// `jac[r][c] = ∂x_r / ∂ξ_c`
    pub jac: [[f64; 2]; 2],
    pub inv: [[f64; 2]; 2],
    pub det: f64,
}

impl AffineMap {
    pub fn new(p0: Point, p1: Point, p2: Point) -> Self {
        let jac = [[p1[0] - p0[0], p2[0] - p0[0]], [p1[1] - p0[1], p2[1] - p0[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [
            [jac[1][1] / det, -jac[0][1] / det],
            [-jac[1][0] / det, jac[0][0] / det],
        ];
        Self {
            origin: p0,
            jac,
            inv,
            det,
        }
    }

    #[inline]
    pub fn to_physical(&self, xi: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    #[inline]
    pub fn to_reference(&self, x: Point) -> Point {
        let d = sub(x, self.origin);
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from the reference gradient: `J^{-T} ∇_ξ`.
    #[inline]
    pub fn grad(&self, g: Point) -> Point {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }

    /// Physical Hessian from the reference Hessian `[ξξ, ξη, ηη]`:
    /// `J^{-T} H J^{-1}`.
    #[inline]
    pub fn hess(&self, h: Sym) -> Sym {
        let m = &self.inv;
        let hm = |a: usize, b: usize| -> f64 {
            m[0][a] * (h[0] * m[0][b] + h[1] * m[1][b]) + m[1][a] * (h[1] * m[0][b] + h[2] * m[1][b])
        };
        [hm(0, 0), hm(0, 1), hm(1, 1)]
    }

    /// Absolute area scaling of the map (twice the triangle area).
    #[inline]
    pub fn abs_det(&self) -> f64 {
        self.det.abs()
    }
}
