//! Small dense linear algebra shared by the model reduction and the simulator.
//!
//! Reduction runs in exact rational arithmetic so that cancellations between
//! resistances spanning ten orders of magnitude (milliohm on-resistances next
//! to megaohm off-resistances) do not leak rounding noise into the state
//! matrices. The simulator uses the same LU in `f64`.

use std::fmt;
use std::ops::{Index, IndexMut};

use nalgebra::DMatrix;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive};

/// Relative pivot threshold: `|pivot| < PIVOT_TOLERANCE * max|a_ij|` is singular.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

/// Field operations needed by the LU and the reduction.
pub trait Scalar: Clone + PartialOrd + Signed + fmt::Debug {
    fn from_f64(v: f64) -> Self;
    fn to_f64(&self) -> f64;
}

impl Scalar for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn to_f64(&self) -> f64 {
        *self
    }
}

impl Scalar for BigRational {
    /// Exact conversion; every finite `f64` is a dyadic rational.
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("non-finite value in exact arithmetic")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
}

/// Row-major dense matrix over any [`Scalar`].
#[derive(Clone, PartialEq)]
pub struct Dense<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Dense<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<&[T]> = self.data.chunks(self.cols.max(1)).collect();
        f.debug_struct("Dense")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("data", &rows)
            .finish()
    }
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let mut out = Self::zeros(m.nrows(), m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                out[(i, j)] = T::from_f64(m[(i, j)]);
            }
        }
        out
    }

    pub fn to_dmatrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self[(i, j)].to_f64())
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(j, i)] = self[(i, j)].clone();
            }
        }
        out
    }

    /// Sub-matrix picking the given rows and columns, in the given order.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                out[(a, b)] = self[(i, j)].clone();
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = &rhs[(k, j)];
                    if b.is_zero() {
                        continue;
                    }
                    out[(i, j)] = out[(i, j)].clone() + a.clone() * b.clone();
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        self.zip(rhs, |a, b| a - b)
    }

    pub fn neg(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| -v.clone()).collect(),
        }
    }

    fn zip(&self, rhs: &Self, f: impl Fn(T, T) -> T) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| f(a.clone(), b.clone()))
                .collect(),
        }
    }

    /// `[self rhs]`
    pub fn hstack(&self, rhs: &Self) -> Self {
        assert_eq!(self.rows, rhs.rows);
        let mut out = Self::zeros(self.rows, self.cols + rhs.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self[(i, j)].clone();
            }
            for j in 0..rhs.cols {
                out[(i, self.cols + j)] = rhs[(i, j)].clone();
            }
        }
        out
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |m, v| if v > m { v } else { m })
    }

    pub fn row_is_zero(&self, i: usize) -> bool {
        (0..self.cols).all(|j| self[(i, j)].is_zero())
    }

    pub fn col_is_zero(&self, j: usize) -> bool {
        (0..self.rows).all(|i| self[(i, j)].is_zero())
    }
}

impl<T> Index<(usize, usize)> for Dense<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Dense<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Pivot failure at elimination column `column`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("matrix is singular (pivot {column} below threshold)")]
pub struct Singular {
    pub column: usize,
}

/// Partial-pivot LU factorization `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu<T> {
    factors: Dense<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> Lu<T> {
    pub fn new(a: &Dense<T>) -> Result<Self, Singular> {
        assert_eq!(a.rows, a.cols, "LU needs a square matrix");
        let n = a.rows;
        let mut f = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let threshold = T::from_f64(PIVOT_TOLERANCE) * a.max_abs();
        for k in 0..n {
            let mut p = k;
            let mut best = f[(k, k)].abs();
            for i in k + 1..n {
                let v = f[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best.is_zero() || best < threshold {
                return Err(Singular { column: k });
            }
            if p != k {
                for j in 0..n {
                    f.data.swap(k * n + j, p * n + j);
                }
                perm.swap(k, p);
            }
            let pivot = f[(k, k)].clone();
            for i in k + 1..n {
                if f[(i, k)].is_zero() {
                    continue;
                }
                let factor = f[(i, k)].clone() / pivot.clone();
                for j in k + 1..n {
                    let u = f[(k, j)].clone();
                    if !u.is_zero() {
                        f[(i, j)] = f[(i, j)].clone() - factor.clone() * u;
                    }
                }
                f[(i, k)] = factor;
            }
        }
        Ok(Self { factors: f, perm })
    }

    /// Solves `A X = B` column by column.
    pub fn solve(&self, b: &Dense<T>) -> Dense<T> {
        let n = self.factors.rows;
        assert_eq!(b.rows, n);
        let mut x = Dense::zeros(n, b.cols);
        for c in 0..b.cols {
            let mut y: Vec<T> = self.perm.iter().map(|&p| b[(p, c)].clone()).collect();
            for i in 0..n {
                for k in 0..i {
                    let l = &self.factors[(i, k)];
                    if !l.is_zero() {
                        y[i] = y[i].clone() - l.clone() * y[k].clone();
                    }
                }
            }
            for i in (0..n).rev() {
                for k in i + 1..n {
                    let u = &self.factors[(i, k)];
                    if !u.is_zero() {
                        y[i] = y[i].clone() - u.clone() * y[k].clone();
                    }
                }
                y[i] = y[i].clone() / self.factors[(i, i)].clone();
            }
            for (i, v) in y.into_iter().enumerate() {
                x[(i, c)] = v;
            }
        }
        x
    }
}

/// Solves `A X = B` in `f64` with the shared pivot threshold.
pub fn solve_f64(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>, Singular> {
    let lu = Lu::new(&Dense::<f64>::from_dmatrix(a))?;
    Ok(lu.solve(&Dense::from_dmatrix(b)).to_dmatrix())
}

/// `Phi = e^{A h}` and `Gamma = (integral_0^h e^{A s} ds) B`, from one
/// exponential of the augmented matrix `[[A, B], [0, 0]] h`.
pub fn exact_discretization(a: &DMatrix<f64>, b: &DMatrix<f64>, h: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let p = b.ncols();
    let mut aug = DMatrix::<f64>::zeros(n + p, n + p);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a * h));
    aug.view_mut((0, n), (n, p)).copy_from(&(b * h));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, p)).into_owned())
}

/// `e^{F t}` together with `integral_0^t e^{F s} ds` via the block exponential
/// of `[[F, I], [0, 0]] t`.
pub fn exp_and_integral(f: &DMatrix<f64>, t: f64) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = f.nrows();
    let mut aug = DMatrix::<f64>::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(f * t));
    aug.view_mut((0, n), (n, n))
        .copy_from(&(DMatrix::<f64>::identity(n, n) * t));
    let e = aug.exp();
    (e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, n)).into_owned())
}

/// Largest relative entry deviation, `|a - b| / max(|a|, |b|)`; two exact
/// zeros count as equal.
pub fn max_relative_deviation(a: &DMatrix<f64>, b: &DMatrix<f64>) -> (f64, Option<(usize, usize)>) {
    assert_eq!(a.shape(), b.shape());
    let mut worst = 0.0;
    let mut at = None;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let (x, y) = (a[(i, j)], b[(i, j)]);
            let scale = x.abs().max(y.abs());
            let dev = if scale == 0.0 { 0.0 } else { (x - y).abs() / scale };
            if dev > worst || (dev.is_nan() && at.is_none()) {
                worst = dev;
                at = Some((i, j));
            }
        }
    }
    (worst, at)
}
