//! Truncated bivariate Taylor polynomials of order four, used to
//! differentiate closed-form solutions up to the bilaplacian.

use std::ops::{Add, Mul, Neg, Sub};

const ORDER: usize = 4;
const LEN: usize = (ORDER + 1) * (ORDER + 2) / 2;

/// Index of the coefficient of `dx^i dy^j`.
#[inline]
const fn idx(i: usize, j: usize) -> usize {
    let d = i + j;
    d * (d + 1) / 2 + j
}

/// `Σ c_ij dx^i dy^j` truncated after total degree four; `c_ij` equals
/// `∂^{i+j} f / (i! j! ∂x^i ∂y^j)` at the expansion point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Taylor {
    c: [f64; LEN],
}

impl Taylor {
    pub fn constant(v: f64) -> Self {
        let mut c = [0.0; LEN];
        c[0] = v;
        Self { c }
    }

    /// The coordinate `x` expanded at `x0`.
    pub fn var_x(x0: f64) -> Self {
        let mut t = Self::constant(x0);
        t.c[idx(1, 0)] = 1.0;
        t
    }

    /// The coordinate `y` expanded at `y0`.
    pub fn var_y(y0: f64) -> Self {
        let mut t = Self::constant(y0);
        t.c[idx(0, 1)] = 1.0;
        t
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        self.c[idx(i, j)]
    }

    pub fn gradient(&self) -> [f64; 2] {
        [self.coeff(1, 0), self.coeff(0, 1)]
    }

    /// `[∂xx, ∂xy, ∂yy]`.
    pub fn hessian(&self) -> [f64; 3] {
        [2.0 * self.coeff(2, 0), self.coeff(1, 1), 2.0 * self.coeff(0, 2)]
    }

    /// `∂xxxx + 2 ∂xxyy + ∂yyyy`.
    pub fn bilaplacian(&self) -> f64 {
        24.0 * self.coeff(4, 0) + 8.0 * self.coeff(2, 2) + 24.0 * self.coeff(0, 4)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            c: self.c.map(|x| s * x),
        }
    }

    /// `g ∘ self` given `g^{(n)}` at `self.value()` for `n = 0..=4`.
    pub fn compose(&self, derivs: [f64; ORDER + 1]) -> Self {
        let mut h = *self;
        h.c[0] = 0.0;
        let mut out = Self::constant(derivs[0]);
        let mut power = Self::constant(1.0);
        let mut fact = 1.0;
        for (n, d) in derivs.iter().enumerate().skip(1) {
            power = power * h;
            fact *= n as f64;
            out = out + power.scale(d / fact);
        }
        out
    }

    pub fn powf(&self, p: f64) -> Self {
        let s = self.value();
        let mut d = [0.0; ORDER + 1];
        let mut coef = 1.0;
        for (n, dn) in d.iter_mut().enumerate() {
            *dn = coef * s.powf(p - n as f64);
            coef *= p - n as f64;
        }
        self.compose(d)
    }

    pub fn recip(&self) -> Self {
        let s = self.value();
        let mut d = [0.0; ORDER + 1];
        let mut coef = 1.0;
        for (n, dn) in d.iter_mut().enumerate() {
            *dn = coef / s.powi(n as i32 + 1);
            coef *= -(n as f64 + 1.0);
        }
        self.compose(d)
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c, s])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s, c])
    }

    /// Polar angle of `(x, y)` in `[0, 2π)` at the expansion point; the
    /// expansion itself is branch free.
    pub fn polar_angle(x: &Taylor, y: &Taylor) -> Self {
        let (x0, y0) = (x.value(), y.value());
        let mut phi0 = y0.atan2(x0);
        if phi0 < 0.0 {
            phi0 += 2.0 * std::f64::consts::PI;
        }
        // Angle between (x0, y0) and (x, y): atan(cross / dot), cross(0) = 0.
        let cross = *y * Taylor::constant(x0) - *x * Taylor::constant(y0);
        let dotp = *x * Taylor::constant(x0) + *y * Taylor::constant(y0);
        let t = cross * dotp.recip();
        let mut out = t.compose([0.0, 1.0, 0.0, -2.0, 0.0]);
        out.c[0] = phi0;
        out
    }
}

impl Add for Taylor {
    type Output = Taylor;
    fn add(self, o: Taylor) -> Taylor {
        Taylor {
            c: std::array::from_fn(|i| self.c[i] + o.c[i]),
        }
    }
}

impl Sub for Taylor {
    type Output = Taylor;
    fn sub(self, o: Taylor) -> Taylor {
        Taylor {
            c: std::array::from_fn(|i| self.c[i] - o.c[i]),
        }
    }
}

impl Neg for Taylor {
    type Output = Taylor;
    fn neg(self) -> Taylor {
        self.scale(-1.0)
    }
}

/// Number of coefficient pairs whose product survives the truncation.
const PAIRS: usize = 70;

/// `(a, b, c)`: coefficient `a` times coefficient `b` contributes to `c`.
const PRODUCT_TABLE: [(u8, u8, u8); PAIRS] = {
    let mut t = [(0u8, 0u8, 0u8); PAIRS];
    let mut n = 0;
    let mut d1 = 0;
    while d1 <= ORDER {
        let mut j1 = 0;
        while j1 <= d1 {
            let mut d2 = 0;
            while d2 <= ORDER - d1 {
                let mut j2 = 0;
                while j2 <= d2 {
                    t[n] = (
                        idx(d1 - j1, j1) as u8,
                        idx(d2 - j2, j2) as u8,
                        idx(d1 - j1 + d2 - j2, j1 + j2) as u8,
                    );
                    n += 1;
                    j2 += 1;
                }
                d2 += 1;
            }
            j1 += 1;
        }
        d1 += 1;
    }
    assert!(n == PAIRS);
    t
};

impl Mul for Taylor {
    type Output = Taylor;
    fn mul(self, o: Taylor) -> Taylor {
        let mut c = [0.0; LEN];
        for &(a, b, r) in &PRODUCT_TABLE {
            c[r as usize] += self.c[a as usize] * o.c[b as usize];
        }
        Taylor { c }
    }
}

impl Mul<f64> for Taylor {
    type Output = Taylor;
    fn mul(self, s: f64) -> Taylor {
        self.scale(s)
    }
}
