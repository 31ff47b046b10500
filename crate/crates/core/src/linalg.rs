//! Sparse assembly and direct solves.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicate entries are summed.
#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<Triplet<usize, usize, f64>>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        if v != 0.0 {
            self.entries.push(Triplet::new(i, j, v));
        }
    }

    pub fn build(&self) -> Result<SparseMatrix> {
        let m = SparseColMat::try_new_from_triplets(self.n, self.n, &self.entries)
            .map_err(|e| Error::InvalidArgument(format!("sparse assembly failed: {e:?}")))?;
        Ok(SparseMatrix { inner: m })
    }
}

/// A square sparse matrix.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    inner: SparseColMat<usize, f64>,
}

impl SparseMatrix {
    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        let m = self.inner.as_ref();
        for j in 0..m.ncols() {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                y[i] += v * xj;
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.mul_vec(y))
    }

    /// All stored entries as `(row, col, value)`, column by column.
    pub fn entries(&self) -> Vec<(usize, usize, f64)> {
        let m = self.inner.as_ref();
        let mut out = Vec::new();
        for j in 0..m.ncols() {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                out.push((i, j, *v));
            }
        }
        out
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.inner.val().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut d = nalgebra::DMatrix::zeros(self.dim(), self.dim());
        for (i, j, v) in self.entries() {
            d[(i, j)] += v;
        }
        d
    }

    /// Solves `A x = b` for symmetric positive definite `A`.
    pub fn solve_spd(&self, b: &[f64]) -> Result<Vec<f64>> {
        match self.inner.sp_cholesky(Side::Lower) {
            Ok(llt) => self.refined(b, |r| llt.solve(r)),
            Err(_) => self.solve(b),
        }
    }

    /// Solves `A x = b` by sparse LU.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let lu = self.inner.sp_lu().map_err(|e| Error::SolverBreakdown {
            reason: format!("sparse LU failed: {e:?}"),
            residual: f64::NAN,
        })?;
        self.refined(b, |r| lu.solve(r))
    }

    /// Direct solve followed by a few steps of iterative refinement.
    fn refined(&self, b: &[f64], solve: impl Fn(&Mat<f64>) -> Mat<f64>) -> Result<Vec<f64>> {
        let col = |v: &[f64]| Mat::<f64>::from_fn(v.len(), 1, |i, _| v[i]);
        let sol = solve(&col(b));
        let mut x: Vec<f64> = (0..b.len()).map(|i| sol[(i, 0)]).collect();
        for _ in 0..3 {
            let ax = self.mul_vec(&x);
            let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if relative_norm(&r, b) <= 1e-13 {
                break;
            }
            let d = solve(&col(&r));
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += d[(i, 0)];
            }
        }
        self.checked(b, x)
    }

    fn checked(&self, b: &[f64], x: Vec<f64>) -> Result<Vec<f64>> {
        let ax = self.mul_vec(&x);
        let r: Vec<f64> = ax.iter().zip(b).map(|(a, b)| a - b).collect();
        let rel = relative_norm(&r, b);
        if rel.is_finite() && (rel <= 1e-10 || self.backward_error(&x, b, &r) <= 1e-12) {
            return Ok(x);
        }
        Err(Error::SolverBreakdown {
            reason: "residual above 1e-10 relative and above rounding level".into(),
            residual: rel,
        })
    }

    /// Componentwise backward error `max_i |r_i| / (|A| |x| + |b|)_i`.
    pub fn backward_error(&self, x: &[f64], b: &[f64], r: &[f64]) -> f64 {
        let mut scale: Vec<f64> = b.iter().map(|v| v.abs()).collect();
        let m = self.inner.as_ref();
        for j in 0..m.ncols() {
            for (i, v) in m.row_idx_of_col(j).zip(m.val_of_col(j)) {
                scale[i] += (v * x[j]).abs();
            }
        }
        r.iter()
            .zip(&scale)
            .map(|(r, s)| if *s > 0.0 { r.abs() / s } else if *r == 0.0 { 0.0 } else { f64::INFINITY })
            .fold(0.0, f64::max)
    }
}

/// `‖r‖ / ‖b‖` (or `‖r‖` for `b = 0`).
fn relative_norm(r: &[f64], b: &[f64]) -> f64 {
    let nr = dot(r, r).sqrt();
    let nb = dot(b, b).sqrt();
    if nb > 0.0 {
        nr / nb
    } else {
        nr
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Restriction of a system to the unconstrained unknowns.
#[derive(Clone, Debug)]
pub struct DofMap {
    /// Reduced index of each full unknown, `None` if constrained.
    pub reduced: Vec<Option<usize>>,
    pub full: Vec<usize>,
}

impl DofMap {
    pub fn from_constrained(constrained: &[bool]) -> Self {
        let mut reduced = vec![None; constrained.len()];
        let mut full = Vec::new();
        for (i, &c) in constrained.iter().enumerate() {
            if !c {
                reduced[i] = Some(full.len());
                full.push(i);
            }
        }
        Self { reduced, full }
    }

    pub fn num_free(&self) -> usize {
        self.full.len()
    }

    pub fn expand(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.reduced.len()];
        for (r, &f) in self.full.iter().enumerate() {
            out[f] = x[r];
        }
        out
    }

    pub fn restrict(&self, x: &[f64]) -> Vec<f64> {
        self.full.iter().map(|&f| x[f]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spd_and_lu_solves_agree() {
        let n = 30;
        let mut b = TripletBuilder::new(n);
        for i in 0..n {
            b.add(i, i, 2.0);
            b.add(i, i, 1.0);
            if i + 1 < n {
                b.add(i, i + 1, -1.0);
                b.add(i + 1, i, -1.0);
            }
        }
        let a = b.build().unwrap();
        let rhs: Vec<f64> = (0..n).map(|i| (i % 5) as f64 - 2.0).collect();
        let x1 = a.solve_spd(&rhs).unwrap();
        let x2 = a.solve(&rhs).unwrap();
        for (p, q) in x1.iter().zip(&x2) {
            assert!((p - q).abs() < 1e-12);
        }
        let dense = a.to_dense();
        assert_eq!(dense[(0, 0)], 3.0);
        assert!((a.bilinear(&x1, &x1) - dot(&x1, &rhs)).abs() < 1e-10);
    }

    #[test]
    fn singular_system_is_reported() {
        let mut b = TripletBuilder::new(2);
        b.add(0, 0, 1.0);
        b.add(0, 1, 1.0);
        b.add(1, 0, 1.0);
        b.add(1, 1, 1.0);
        let a = b.build().unwrap();
        assert!(matches!(a.solve(&[1.0, 0.0]), Err(Error::SolverBreakdown { .. })));
    }

    #[test]
    fn dof_map_round_trip() {
        let m = DofMap::from_constrained(&[true, false, false, true, false]);
        assert_eq!(m.num_free(), 3);
        let x = m.expand(&[1.0, 2.0, 3.0]);
        assert_eq!(x, vec![0.0, 1.0, 2.0, 0.0, 3.0]);
        assert_eq!(m.restrict(&x), vec![1.0, 2.0, 3.0]);
    }
}
