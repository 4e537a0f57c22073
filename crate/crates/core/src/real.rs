//! Scalar abstraction for the finite-difference march.
//!
//! The production path runs in `f64`. The same kernel can be instantiated
//! with the double-double [`qd::Quad`] type so that its truncation error can
//! be observed below the `f64` rounding floor.

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub use qd::Quad;

pub trait Real:
    Copy
    + Debug
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + From<f64>
{
    fn abs(self) -> Self;
    fn sqrt(self) -> Self;
    fn to_f64(self) -> f64;

    fn zero() -> Self {
        Self::from(0.0)
    }

    fn one() -> Self {
        Self::from(1.0)
    }

    fn from_ratio(num: i64, den: i64) -> Self {
        Self::from(num as f64) / Self::from(den as f64)
    }
}

impl Real for f64 {
    fn abs(self) -> Self {
        f64::abs(self)
    }

    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Real for Quad {
    fn abs(self) -> Self {
        Quad::abs(self)
    }

    fn sqrt(self) -> Self {
        Quad::sqrt(self)
    }

    fn to_f64(self) -> f64 {
        self.0 + self.1
    }
}

/// Dense square block stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Block<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Real> Block<T> {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![T::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut b = Self::zeros(n);
        for i in 0..n {
            b.data[i * n + i] = T::one();
        }
        b
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    let idx = i * n + j;
                    out.data[idx] = out.data[idx] + a * rhs.get(k, j);
                }
            }
        }
        out
    }

    /// `self += scale * other`
    pub fn axpy(&mut self, scale: T, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + scale * *b;
        }
    }

    pub fn scaled(&self, scale: T) -> Self {
        Self { n: self.n, data: self.data.iter().map(|&v| v * scale).collect() }
    }

    pub fn max_abs(&self) -> T {
        let mut m = T::zero();
        for &v in &self.data {
            let a = v.abs();
            if a > m {
                m = a;
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.to_f64().is_finite())
    }

    /// Solves `self * X = rhs` by Gaussian elimination with partial pivoting.
    /// Returns `None` when a pivot falls below `rel_tol * max|self|`.
    pub fn solve(&self, rhs: &Self, rel_tol: f64) -> Option<Self> {
        self.solve_with_floor(rhs, self.max_abs() * T::from(rel_tol))
    }

    /// As [`Block::solve`], with an absolute pivot floor.
    pub fn solve_with_floor(&self, rhs: &Self, floor: T) -> Option<Self> {
        let n = self.n;
        let mut a = self.clone();
        let mut x = rhs.clone();
        for col in 0..n {
            let mut piv = col;
            let mut best = a.get(col, col).abs();
            for r in col + 1..n {
                let v = a.get(r, col).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if !(best > floor) {
                return None;
            }
            if piv != col {
                for j in 0..n {
                    a.data.swap(col * n + j, piv * n + j);
                    x.data.swap(col * n + j, piv * n + j);
                }
            }
            let p = a.get(col, col);
            for r in col + 1..n {
                let factor = a.get(r, col) / p;
                if factor.to_f64() == 0.0 {
                    continue;
                }
                for j in col..n {
                    let v = a.get(r, j) - factor * a.get(col, j);
                    a.set(r, j, v);
                }
                for j in 0..n {
                    let v = x.get(r, j) - factor * x.get(col, j);
                    x.set(r, j, v);
                }
            }
        }
        for col in (0..n).rev() {
            let p = a.get(col, col);
            for j in 0..n {
                let mut v = x.get(col, j);
                for k in col + 1..n {
                    v = v - a.get(col, k) * x.get(k, j);
                }
                x.set(col, j, v / p);
            }
        }
        Some(x)
    }
}

/// Upper-triangular `R` of the thin QR factorization of `[top; bottom]`,
/// by modified Gram-Schmidt. `None` if a column collapses.
pub fn stacked_r<T: Real>(top: &Block<T>, bottom: &Block<T>) -> Option<Block<T>> {
    let n = top.dim();
    let mut cols: Vec<Vec<T>> = (0..n)
        .map(|j| (0..n).map(|i| top.get(i, j)).chain((0..n).map(|i| bottom.get(i, j))).collect())
        .collect();
    let mut r = Block::<T>::zeros(n);
    for j in 0..n {
        for k in 0..j {
            let mut dot = T::zero();
            for (a, b) in cols[k].iter().zip(&cols[j]) {
                dot = dot + *a * *b;
            }
            r.set(k, j, dot);
            let (done, rest) = cols.split_at_mut(j);
            for (x, q) in rest[0].iter_mut().zip(&done[k]) {
                *x = *x - dot * *q;
            }
        }
        let mut norm = T::zero();
        for &x in &cols[j] {
            norm = norm + x * x;
        }
        let norm = norm.sqrt();
        if !(norm.to_f64() > 0.0) || !norm.to_f64().is_finite() {
            return None;
        }
        r.set(j, j, norm);
        for x in cols[j].iter_mut() {
            *x = *x / norm;
        }
    }
    Some(r)
}

impl Block<f64> {
    pub fn to_dmatrix(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_row_slice(self.n, self.n, &self.data)
    }

    pub fn from_dmatrix(m: &nalgebra::DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        Self::from_fn(m.nrows(), |i, j| m[(i, j)])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_recovers_known_product() {
        let a = Block::<f64>::from_fn(3, |i, j| if i == j { 4.0 } else { 1.0 / (1 + i + j) as f64 });
        let x = Block::<f64>::from_fn(3, |i, j| (i as f64) - 2.0 * j as f64 + 0.5);
        let b = a.mul(&x);
        let got = a.solve(&b, 1e-14).unwrap();
        for (g, e) in got.as_slice().iter().zip(x.as_slice()) {
            assert!((g - e).abs() < 1e-13);
        }
    }

    #[test]
    fn solve_needs_pivoting() {
        let a = Block::<f64>::from_fn(2, |i, j| [[0.0, 1.0], [1.0, 0.0]][i][j]);
        let b = Block::<f64>::identity(2);
        let x = a.solve(&b, 1e-14).unwrap();
        assert_eq!(x, a);
    }

    #[test]
    fn singular_block_is_rejected() {
        let a = Block::<f64>::from_fn(2, |_, _| 1.0);
        assert!(a.solve(&Block::identity(2), 1e-14).is_none());
    }

    #[test]
    fn stacked_r_reproduces_gram() {
        let top = Block::<f64>::from_fn(3, |i, j| 1.0 / (1 + i + 2 * j) as f64);
        let bottom = Block::<f64>::from_fn(3, |i, j| (i as f64 - j as f64).sin());
        let r = stacked_r(&top, &bottom).unwrap();
        // RᵀR equals the Gram matrix of the stacked columns
        for a in 0..3 {
            for b in 0..3 {
                let mut rr = 0.0;
                for k in 0..3 {
                    rr += r.get(k, a) * r.get(k, b);
                }
                let mut g = 0.0;
                for i in 0..3 {
                    g += top.get(i, a) * top.get(i, b) + bottom.get(i, a) * bottom.get(i, b);
                }
                assert!((rr - g).abs() < 1e-14);
            }
            for k in a + 1..3 {
                assert_eq!(r.get(k, a), 0.0);
            }
        }
    }

    #[test]
    fn quad_solve_beats_f64_precision() {
        let a = Block::<Quad>::from_fn(2, |i, j| Quad::from([[3.0, 1.0], [1.0, 7.0]][i][j]));
        let x = a.solve(&Block::identity(2), 1e-30).unwrap();
        let r = a.mul(&x);
        let err = (r.get(0, 0) - Quad::from(1.0)).abs().to_f64();
        assert!(err < 1e-30, "{err}");
    }
}
