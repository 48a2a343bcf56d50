//! Small dense row-major matrices.
//!
//! Everything here is sized by `p` (periods) or `t` (treatments), so the
//! matrices never exceed a handful of rows. Ring operations and inversion
//! work over any [`Field`]; the symmetric eigen-decomposition (cyclic Jacobi)
//! and the pseudo-inverse need [`Real`].

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Field, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Field> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
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

    /// `B_n = I_n - J_n / n`.
    pub fn centering(n: usize) -> Self {
        let inv = T::one() / T::from_int(n as i64);
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = if i == j { T::one() - inv } else { -inv };
            }
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Mat {
            rows: r,
            cols: c,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, k: T) -> Self {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    pub fn trace(&self) -> T {
        (0..self.rows.min(self.cols)).fold(T::zero(), |acc, i| acc + self[(i, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul dimension mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// `self' * other * rhs`, the congruence used for every information block.
    pub fn sandwich(&self, middle: &Self, rhs: &Self) -> Self {
        self.transpose().matmul(middle).matmul(rhs)
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    /// `u' self v`.
    pub fn quad_form(&self, u: &[T], v: &[T]) -> T {
        let sv = self.mul_vec(v);
        u.iter().zip(&sv).fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.rows)
            .map(|i| self.row(i).iter().fold(T::zero(), |acc, &x| acc + x))
            .collect()
    }

    pub fn sum_all(&self) -> T {
        self.data.iter().fold(T::zero(), |acc, &x| acc + x)
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, &x| if x.abs_val() > acc { x.abs_val() } else { acc })
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.rows {
            for j in 0..i {
                let d = (self[(i, j)] - self[(j, i)]).abs_val();
                if d > worst {
                    worst = d;
                }
            }
        }
        worst
    }

    /// Gauss-Jordan inverse with partial pivoting on absolute value.
    pub fn inverse(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let mut pivot = col;
            for r in col + 1..n {
                if a[(r, col)].abs_val() > a[(pivot, col)].abs_val() {
                    pivot = r;
                }
            }
            if a[(pivot, col)] == T::zero() {
                return Err(Error::Singular);
            }
            if pivot != col {
                a.swap_rows(pivot, col);
                inv.swap_rows(pivot, col);
            }
            let d = a[(col, col)];
            for j in 0..n {
                a[(col, j)] = a[(col, j)] / d;
                inv[(col, j)] = inv[(col, j)] / d;
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let f = a[(r, col)];
                if f == T::zero() {
                    continue;
                }
                for j in 0..n {
                    a[(r, j)] = a[(r, j)] - f * a[(col, j)];
                    inv[(r, j)] = inv[(r, j)] - f * inv[(col, j)];
                }
            }
        }
        Ok(inv)
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }
}

impl<T: Real> Mat<T> {
    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    /// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
    pub fn symmetric_eigen(&self) -> SymmetricEigen<T> {
        assert!(self.is_square(), "eigen of non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        // symmetrize against round-off in the caller's assembly
        for i in 0..n {
            for j in 0..i {
                let m = (a[(i, j)] + a[(j, i)]) / T::from_int(2);
                a[(i, j)] = m;
                a[(j, i)] = m;
            }
        }
        let mut v = Self::identity(n);
        let eps = T::epsilon();
        for _sweep in 0..100 {
            let mut off = T::zero();
            for i in 0..n {
                for j in 0..i {
                    off = off + a[(i, j)] * a[(i, j)];
                }
            }
            let scale = a.frobenius();
            if off.sqrt() <= eps * scale || off == T::zero() {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[(p, q)];
                    if apq == T::zero() {
                        continue;
                    }
                    let two = T::from_int(2);
                    let theta = (a[(q, q)] - a[(p, p)]) / (two * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                    let c = T::one() / (t * t + T::one()).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        a[(k, p)] = c * akp - s * akq;
                        a[(k, q)] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[(p, k)];
                        let aqk = a[(q, k)];
                        a[(p, k)] = c * apk - s * aqk;
                        a[(q, k)] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[(k, p)];
                        let vkq = v[(k, q)];
                        v[(k, p)] = c * vkp - s * vkq;
                        v[(k, q)] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| a[(i, i)].partial_cmp(&a[(j, j)]).unwrap_or(std::cmp::Ordering::Equal));
        let values = order.iter().map(|&i| a[(i, i)]).collect();
        let vectors = Self::from_fn(n, n, |r, c| v[(r, order[c])]);
        SymmetricEigen { values, vectors }
    }

    /// Spectral pseudo-inverse; eigenvalues below `rel_cutoff * max|eig|` are
    /// treated as zero.
    pub fn pseudo_inverse(&self, rel_cutoff: T) -> Self {
        let eig = self.symmetric_eigen();
        let n = self.rows;
        let largest = eig
            .values
            .iter()
            .fold(T::zero(), |acc, &x| acc.max(x.abs()));
        let cutoff = rel_cutoff * largest;
        let mut out = Self::zeros(n, n);
        for (k, &lam) in eig.values.iter().enumerate() {
            if lam.abs() <= cutoff || lam == T::zero() {
                continue;
            }
            let inv = T::one() / lam;
            for i in 0..n {
                for j in 0..n {
                    out[(i, j)] = out[(i, j)] + inv * eig.vectors[(i, k)] * eig.vectors[(j, k)];
                }
            }
        }
        out
    }
}

/// Eigenvalues in ascending order, eigenvectors as matching columns.
#[derive(Debug, Clone)]
pub struct SymmetricEigen<T> {
    pub values: Vec<T>,
    pub vectors: Mat<T>,
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

impl<T: Field> Add for &Mat<T> {
    type Output = Mat<T>;
    fn add(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a + b).collect(),
        }
    }
}

impl<T: Field> Sub for &Mat<T> {
    type Output = Mat<T>;
    fn sub(self, rhs: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(&a, &b)| a - b).collect(),
        }
    }
}

impl<T: Field> Mul for &Mat<T> {
    type Output = Mat<T>;
    fn mul(self, rhs: &Mat<T>) -> Mat<T> {
        self.matmul(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i64>;

    #[test]
    fn exact_inverse_of_tridiagonal() {
        let half = Q::new(1, 2);
        let one = Q::from_integer(1);
        let zero = Q::from_integer(0);
        let s = Mat::from_rows(&[
            vec![one, half, zero],
            vec![half, one, half],
            vec![zero, half, one],
        ])
        .unwrap();
        let inv = s.inverse().unwrap();
        assert_eq!(s.matmul(&inv), Mat::identity(3));
        // (1,1) cofactor / det = (1 - 1/4) / (1/2)
        assert_eq!(inv[(0, 0)], Q::new(3, 2));
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert_eq!(m.inverse(), Err(Error::Singular));
    }

    #[test]
    fn jacobi_recovers_known_spectrum() {
        // B_4 has eigenvalues {0, 1, 1, 1}
        let b = Mat::<f64>::centering(4);
        let eig = b.symmetric_eigen();
        assert!(eig.values[0].abs() < 1e-14);
        for &v in &eig.values[1..] {
            assert!((v - 1.0).abs() < 1e-14);
        }
        let m = Mat::from_rows(&[vec![2.0f64, 1.0], vec![1.0, 2.0]]).unwrap();
        let eig = m.symmetric_eigen();
        assert!((eig.values[0] - 1.0).abs() < 1e-14);
        assert!((eig.values[1] - 3.0).abs() < 1e-14);
        // A v = lambda v
        for k in 0..2 {
            let col = [eig.vectors[(0, k)], eig.vectors[(1, k)]];
            let av = m.mul_vec(&col);
            for i in 0..2 {
                assert!((av[i] - eig.values[k] * col[i]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn pseudo_inverse_of_centering_is_itself() {
        let b = Mat::<f64>::centering(5);
        let pinv = b.pseudo_inverse(1e-10);
        assert!((&pinv - &b).max_abs() < 1e-12);
    }
}
