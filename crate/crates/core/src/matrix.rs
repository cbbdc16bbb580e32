//! Dense real matrices, column-major.
//!
//! Lattice bases are bags of column vectors, so columns are stored
//! contiguously: entry `(i, j)` lives at `data[j * rows + i]`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix shape must be positive");
        Matrix {
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

    /// Builds a matrix from column vectors; all columns must share a length.
    pub fn from_columns(columns: &[Vec<T>]) -> Result<Self> {
        let cols = columns.len();
        if cols == 0 {
            return Err(Error::DimensionMismatch {
                context: "Matrix::from_columns",
                expected: 1,
                got: 0,
            });
        }
        let rows = columns[0].len();
        let mut data = Vec::with_capacity(rows * cols);
        for c in columns {
            if c.len() != rows {
                return Err(Error::DimensionMismatch {
                    context: "Matrix::from_columns",
                    expected: rows,
                    got: c.len(),
                });
            }
            data.extend_from_slice(c);
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_rows(rows_in: &[Vec<T>]) -> Result<Self> {
        let m = Self::from_columns(rows_in)?;
        Ok(m.transpose())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn col(&self, j: usize) -> &[T] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [T] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn set_col(&mut self, j: usize, v: &[T]) {
        assert_eq!(v.len(), self.rows);
        self.col_mut(j).copy_from_slice(v);
    }

    pub fn swap_cols(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for i in 0..self.rows {
            self.data.swap(a * self.rows + i, b * self.rows + i);
        }
    }

    /// `col(dst) -= factor * col(src)`
    pub fn col_sub_scaled(&mut self, dst: usize, src: usize, factor: T) {
        assert_ne!(dst, src);
        let (lo, hi) = if dst < src { (dst, src) } else { (src, dst) };
        let (head, tail) = self.data.split_at_mut(hi * self.rows);
        let lo_col = &mut head[lo * self.rows..(lo + 1) * self.rows];
        let hi_col = &mut tail[..self.rows];
        let (d, s) = if dst < src {
            (lo_col, &*hi_col)
        } else {
            (hi_col, &*lo_col)
        };
        for (di, si) in d.iter_mut().zip(s.iter()) {
            *di = *di - factor * *si;
        }
    }

    pub fn columns(&self) -> impl Iterator<Item = &[T]> {
        (0..self.cols).map(move |j| self.col(j))
    }

    pub fn transpose(&self) -> Matrix<T> {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for j in 0..self.cols {
            for i in 0..self.rows {
                out[(j, i)] = self[(i, j)];
            }
        }
        out
    }

    pub fn matmul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "matmul shape mismatch");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for j in 0..rhs.cols {
            for k in 0..self.cols {
                let f = rhs[(k, j)];
                if f == T::zero() {
                    continue;
                }
                let src = self.col(k).to_vec();
                let dst = out.col_mut(j);
                for i in 0..self.rows {
                    dst[i] = dst[i] + f * src[i];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols, "matvec shape mismatch");
        let mut out = vec![T::zero(); self.rows];
        for (j, &f) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.col(j)) {
                *o = *o + f * a;
            }
        }
        out
    }

    /// `selfᵀ · v` without materializing the transpose.
    pub fn transpose_matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.rows, "transpose_matvec shape mismatch");
        (0..self.cols).map(|j| dot(self.col(j), v)).collect()
    }

    /// Largest absolute entry of `selfᵀ·self − I`; zero for orthonormal
    /// columns.
    pub fn orthonormality_error(&self) -> T {
        let mut worst = T::zero();
        for a in 0..self.cols {
            for b in a..self.cols {
                let g = dot(self.col(a), self.col(b));
                let target = if a == b { T::one() } else { T::zero() };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> T {
        self.data
            .iter()
            .fold(T::zero(), |acc, x| acc.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn validate_finite(&self, context: &'static str) -> Result<()> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(context))
        }
    }

    /// Maps every entry through `f` (used for scalar-width conversions).
    pub fn map<U: Scalar>(&self, f: impl Fn(T) -> U) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Row-major copy of the entries, handy for serialization.
    pub fn to_row_major(&self) -> Vec<Vec<T>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)]).collect())
            .collect()
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[j * self.rows + i]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[j * self.rows + i]
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(v: &[T]) -> T {
    dot(v, v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_is_column_major() {
        let m = Matrix::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(m[(0, 0)], 1.0);
        assert_eq!(m[(1, 0)], 2.0);
        assert_eq!(m[(0, 1)], 3.0);
        assert_eq!(m.col(1), &[3.0, 4.0]);
    }

    #[test]
    fn from_rows_transposes() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.cols(), 3);
        assert_eq!(m[(0, 2)], 3.0);
        assert_eq!(m[(1, 0)], 4.0);
    }

    #[test]
    fn matvec_and_matmul_agree() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let v = vec![5.0, 6.0];
        let b = Matrix::from_columns(&[v.clone()]).unwrap();
        let via_mul = a.matmul(&b);
        assert_eq!(a.matvec(&v), via_mul.col(0));
    }

    #[test]
    fn col_sub_scaled_both_directions() {
        let mut m = Matrix::from_columns(&[vec![4.0, 0.0], vec![1.0, 1.0]]).unwrap();
        m.col_sub_scaled(1, 0, 0.25);
        assert_eq!(m.col(1), &[0.0, 1.0]);
        m.col_sub_scaled(0, 1, 2.0);
        assert_eq!(m.col(0), &[4.0, -2.0]);
    }

    #[test]
    fn identity_is_orthonormal() {
        let m = Matrix::<f64>::identity(4);
        assert_eq!(m.orthonormality_error(), 0.0);
    }

    #[test]
    fn nonfinite_detected() {
        let m = Matrix::from_columns(&[vec![1.0, f64::NAN]]).unwrap();
        assert!(m.validate_finite("test").is_err());
    }
}
