//! Determinants of Hermitian positive-definite matrices by elimination over
//! the upper triangle only.
//!
//! For pivot row `k` with real pivot `p`, every upper-triangle entry of the
//! trailing block is updated as `a[i][j] -= conj(a[k][i]) * (a[k][j] / p)`.
//! The quotient is formed once per row as a multiplication by `1/p`, and the
//! determinant is the product of the pivots. No row exchanges are made.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::fixedpt::{ComplexFixed, Fixed, FixedError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("non-positive pivot at row {row}")]
    NonPositivePivot { row: usize },
    #[error("pivot at row {row} is below the reciprocal range of the word")]
    PivotTooSmall { row: usize },
    #[error("zero pivot at row {row}")]
    ZeroPivot { row: usize },
    #[error("non-finite value during elimination at row {row}")]
    NonFinite { row: usize },
    #[error("matrix dimension {0} is not supported here")]
    Dimension(usize),
    #[error(transparent)]
    Fixed(#[from] FixedError),
}

/// Square Hermitian matrix stored as its packed upper triangle, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix<T> {
    dim: usize,
    upper: Vec<T>,
}

pub type HermitianFixed<const L: usize> = HermitianMatrix<ComplexFixed<L>>;
pub type HermitianFloat = HermitianMatrix<Complex64>;

impl<T: Copy + Default> HermitianMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, upper: vec![T::default(); packed_len(dim)] }
    }

    /// Builds the matrix from its upper triangle: `f(i, j)` is called for `i <= j`.
    pub fn from_upper_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut upper = Vec::with_capacity(packed_len(dim));
        for i in 0..dim {
            for j in i..dim {
                upper.push(f(i, j));
            }
        }
        Self { dim, upper }
    }

    /// Reshapes in place, keeping the allocation. Contents are unspecified.
    pub fn reset(&mut self, dim: usize) {
        self.dim = dim;
        self.upper.resize(packed_len(dim), T::default());
    }
}

impl<T: Copy> HermitianMatrix<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn packed(&self) -> &[T] {
        &self.upper
    }

    pub fn packed_mut(&mut self) -> &mut [T] {
        &mut self.upper
    }

    /// Stored entry `(i, j)` with `i <= j`.
    #[inline]
    pub fn upper(&self, i: usize, j: usize) -> T {
        self.upper[index(self.dim, i, j)]
    }

    #[inline]
    pub fn set_upper(&mut self, i: usize, j: usize, v: T) {
        let k = index(self.dim, i, j);
        self.upper[k] = v;
    }
}

impl HermitianFloat {
    /// Logical entry, conjugating for the lower triangle.
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        if i <= j {
            self.upper(i, j)
        } else {
            self.upper(j, i).conj()
        }
    }

    pub fn from_dense(m: &DenseMatrix) -> Self {
        Self::from_upper_fn(m.n(), |i, j| m.get(i, j))
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim, |i, j| self.get(i, j))
    }
}

impl<const L: usize> HermitianFixed<L> {
    pub fn get(&self, i: usize, j: usize) -> ComplexFixed<L> {
        if i <= j {
            self.upper(i, j)
        } else {
            self.upper(j, i).conj()
        }
    }
}

#[inline]
pub fn packed_len(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

#[inline]
fn index(dim: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < dim, "({i}, {j}) outside upper triangle of {dim}");
    row_start(dim, i) + (j - i)
}

#[inline]
fn row_start(dim: usize, i: usize) -> usize {
    // rows 0..i hold dim, dim - 1, ..., dim - i + 1 entries
    i * dim - i * i.saturating_sub(1) / 2
}

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Self {
        let n = rows.len();
        assert!(rows.iter().all(|r| r.len() == n), "matrix must be square");
        Self { n, data: rows.concat() }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.n + j] = v;
    }

    pub fn identity_minus(&self) -> Self {
        Self::from_fn(self.n, |i, j| {
            let d = if i == j { 1.0 } else { 0.0 };
            Complex64::new(d, 0.0) - self.get(i, j)
        })
    }

    /// Principal submatrix on the given (ordered) indices.
    pub fn principal(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |a, b| self.get(idx[a], idx[b]))
    }

    /// Largest `|m[i][j] - conj(m[j][i])|`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut worst = 0f64;
        for i in 0..self.n {
            for j in i..self.n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Tallies of the real arithmetic performed by the engine.
///
/// `mul`, `add` and `recip` cover the elimination itself and sum to
/// `4/3 n^3 + n^2 - 4/3 n` per determinant of a complex `n x n` matrix.
/// Pivot products, reciprocal square roots and accumulation are kept apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct OpCounters {
    pub mul: u64,
    pub add: u64,
    pub recip: u64,
    pub rsqrt: u64,
    pub pivot_mul: u64,
    pub accumulate: u64,
}

impl OpCounters {
    pub fn elimination_flops(&self) -> u64 {
        self.mul + self.add + self.recip
    }

    pub fn merge(&mut self, other: &OpCounters) {
        self.mul += other.mul;
        self.add += other.add;
        self.recip += other.recip;
        self.rsqrt += other.rsqrt;
        self.pivot_mul += other.pivot_mul;
        self.accumulate += other.accumulate;
    }
}

/// Determinant of a Hermitian positive-definite fixed-point matrix.
/// The matrix is overwritten by the elimination.
pub fn hermitian_det_fixed<const L: usize>(
    m: &mut HermitianFixed<L>,
    frac_bits: u32,
    counters: &mut OpCounters,
) -> Result<Fixed<L>, LinalgError> {
    let mut scratch = Vec::new();
    hermitian_det_fixed_with(m, frac_bits, counters, &mut scratch)
}

/// [`hermitian_det_fixed`] with a caller-owned scratch row, for hot loops.
pub fn hermitian_det_fixed_with<const L: usize>(
    m: &mut HermitianFixed<L>,
    frac_bits: u32,
    counters: &mut OpCounters,
    scratch: &mut Vec<ComplexFixed<L>>,
) -> Result<Fixed<L>, LinalgError> {
    let n = m.dim;
    if n == 0 {
        return Ok(Fixed::one(frac_bits));
    }
    scratch.clear();
    scratch.resize(n, ComplexFixed::ZERO);
    let a = &mut m.upper;
    let mut det = Fixed::ZERO;
    for k in 0..n {
        let rk = row_start(n, k);
        let pivot = a[rk].re;
        if !pivot.is_positive() {
            return Err(LinalgError::NonPositivePivot { row: k });
        }
        if k == 0 {
            det = pivot;
        } else {
            det = det.mul(pivot, frac_bits);
            counters.pivot_mul += 1;
        }
        if !pivot.recip_fits(frac_bits) {
            return Err(LinalgError::PivotTooSmall { row: k });
        }
        let inv = pivot.recip(frac_bits)?;
        counters.recip += 1;
        for j in k + 1..n {
            scratch[j] = a[rk + j - k].scale(inv, frac_bits);
        }
        let rest = (n - k - 1) as u64;
        counters.mul += 2 * rest;

        for i in k + 1..n {
            let c = a[rk + i - k].conj();
            let ri = row_start(n, i);
            for j in i..n {
                let upd = c.mul(scratch[j], frac_bits);
                let e = &mut a[ri + j - i];
                *e = e.sub(upd);
            }
            // diagonal stays real
            a[ri].im = Fixed::ZERO;
        }
        let updated = rest * (rest + 1) / 2;
        counters.mul += 4 * updated;
        counters.add += 4 * updated;
    }
    Ok(det)
}

/// The same elimination in double precision. Negative pivots are allowed
/// (the result is then the signed determinant); zero or non-finite values
/// are errors.
pub fn hermitian_det_float(m: &HermitianFloat) -> Result<f64, LinalgError> {
    let n = m.dim;
    let mut a = m.upper.clone();
    let mut scratch = vec![Complex64::new(0.0, 0.0); n];
    let mut det = 1.0f64;
    for k in 0..n {
        let rk = row_start(n, k);
        let pivot = a[rk].re;
        if !pivot.is_finite() {
            return Err(LinalgError::NonFinite { row: k });
        }
        if pivot == 0.0 {
            return Err(LinalgError::ZeroPivot { row: k });
        }
        det *= pivot;
        let inv = 1.0 / pivot;
        for j in k + 1..n {
            scratch[j] = a[rk + j - k] * inv;
        }
        for i in k + 1..n {
            let c = a[rk + i - k].conj();
            let ri = row_start(n, i);
            for j in i..n {
                a[ri + j - i] -= c * scratch[j];
            }
            a[ri].im = 0.0;
        }
    }
    if !det.is_finite() {
        return Err(LinalgError::NonFinite { row: n });
    }
    Ok(det)
}

/// Per-determinant elimination cost for a complex `n x n` matrix:
/// `(4n^3 + 3n^2 - 4n) / 3`.
pub fn elimination_flops(n: u64) -> u64 {
    (4 * n * n * n + 3 * n * n - 4 * n) / 3
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn packed_indexing() {
        let m = HermitianFloat::from_upper_fn(4, |i, j| c((10 * i + j) as f64, 0.0));
        assert_eq!(m.packed().len(), 10);
        assert_eq!(m.upper(0, 3).re, 3.0);
        assert_eq!(m.upper(1, 1).re, 11.0);
        assert_eq!(m.upper(2, 3).re, 23.0);
        assert_eq!(m.upper(3, 3).re, 33.0);
        assert_eq!(m.packed().iter().map(|v| v.re).collect::<Vec<_>>(), vec![0., 1., 2., 3., 11., 12., 13., 22., 23., 33.]);
    }

    #[test]
    fn two_by_two_closed_form() {
        let dense = DenseMatrix::from_rows(&[vec![c(2.0, 0.0), c(1.0, 1.0)], vec![c(1.0, -1.0), c(3.0, 0.0)]]);
        let h = HermitianFloat::from_dense(&dense);
        assert_eq!(hermitian_det_float(&h).unwrap(), 4.0);

        let f = 100;
        let mut hf = HermitianFixed::<2>::from_upper_fn(2, |i, j| {
            let v = dense.get(i, j);
            ComplexFixed::from_f64(v.re, v.im, f).unwrap()
        });
        let mut counters = OpCounters::default();
        let det = hermitian_det_fixed(&mut hf, f, &mut counters).unwrap();
        assert!((det.to_f64(f) - 4.0).abs() < 1e-25);
        assert_eq!(counters.elimination_flops(), elimination_flops(2));
    }

    #[test]
    fn identity_and_scaled_identity() {
        for n in [2usize, 4, 6] {
            let id = HermitianFloat::from_dense(&DenseMatrix::identity(n));
            assert_eq!(hermitian_det_float(&id).unwrap(), 1.0);
            let mut fid = HermitianFixed::<2>::from_upper_fn(n, |i, j| {
                if i == j {
                    ComplexFixed::new(Fixed::one(90), Fixed::ZERO)
                } else {
                    ComplexFixed::ZERO
                }
            });
            let det = hermitian_det_fixed(&mut fid, 90, &mut OpCounters::default()).unwrap();
            assert_eq!(det, Fixed::one(90));
        }
        let half = HermitianFloat::from_upper_fn(6, |i, j| if i == j { c(0.5, 0.0) } else { c(0.0, 0.0) });
        assert_eq!(hermitian_det_float(&half).unwrap(), 0.015625);
    }

    #[test]
    fn counters_follow_cost_model() {
        for n in 1..12usize {
            let f = 100;
            let mut m = HermitianFixed::<2>::from_upper_fn(n, |i, j| {
                let v = if i == j { 1.0 } else { 0.01 * (i + j) as f64 / n as f64 };
                ComplexFixed::from_f64(v, if i == j { 0.0 } else { 0.003 }, f).unwrap()
            });
            let mut counters = OpCounters::default();
            hermitian_det_fixed(&mut m, f, &mut counters).unwrap();
            assert_eq!(counters.elimination_flops(), elimination_flops(n as u64), "n={n}");
            assert_eq!(counters.recip, n as u64);
            assert_eq!(counters.pivot_mul, n as u64 - 1);
        }
        assert_eq!(elimination_flops(2), 12);
    }

    #[test]
    fn breakdown_reports_row() {
        // [[1, 2], [2, 1]] has eigenvalues 3 and -1: second pivot is 1 - 4 = -3
        let f = 60;
        let mut m = HermitianFixed::<2>::from_upper_fn(2, |i, j| {
            ComplexFixed::from_f64(if i == j { 1.0 } else { 2.0 }, 0.0, f).unwrap()
        });
        let err = hermitian_det_fixed(&mut m, f, &mut OpCounters::default()).unwrap_err();
        assert_eq!(err, LinalgError::NonPositivePivot { row: 1 });

        let neg = HermitianFloat::from_upper_fn(2, |i, j| c(if i == j { 1.0 } else { 2.0 }, 0.0));
        assert_eq!(hermitian_det_float(&neg).unwrap(), -3.0);
        let zero = HermitianFloat::zeros(3);
        assert_eq!(hermitian_det_float(&zero), Err(LinalgError::ZeroPivot { row: 0 }));
    }

    #[test]
    fn empty_matrix_has_unit_determinant() {
        let mut m = HermitianFixed::<4>::zeros(0);
        assert_eq!(hermitian_det_fixed(&mut m, 200, &mut OpCounters::default()).unwrap(), Fixed::one(200));
        assert_eq!(hermitian_det_float(&HermitianFloat::zeros(0)).unwrap(), 1.0);
    }
}
