//! Small dense symmetric linear algebra for the coefficient updates.

use crate::error::{Error, Result};
use crate::num::Real;

/// Row-major square matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> SquareMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (j, &v) in row.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `self += w * x x'` (lower and upper triangles).
    #[inline]
    pub fn add_outer(&mut self, x: &[T], w: T) {
        let d = self.dim;
        for i in 0..d {
            let wi = w * x[i];
            let row = &mut self.data[i * d..(i + 1) * d];
            for (j, r) in row.iter_mut().enumerate() {
                *r += wi * x[j];
            }
        }
    }

    pub fn add_diagonal(&mut self, diag: &[T]) {
        for (i, &v) in diag.iter().enumerate() {
            self[(i, i)] += v;
        }
    }

    /// Lower Cholesky factor `L` with `self = L L'`.
    pub fn cholesky(&self) -> Result<Cholesky<T>> {
        let d = self.dim;
        let mut l = vec![T::zero(); d * d];
        for j in 0..d {
            let mut diag = self[(j, j)];
            for k in 0..j {
                diag -= l[j * d + k] * l[j * d + k];
            }
            if !(diag > T::zero()) || !diag.is_finite() {
                return Err(Error::Factorization {
                    index: j,
                    pivot: diag.as_f64(),
                });
            }
            let ljj = diag.sqrt();
            l[j * d + j] = ljj;
            for i in (j + 1)..d {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                l[i * d + j] = s / ljj;
            }
        }
        Ok(Cholesky { dim: d, lower: l })
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

/// Lower-triangular Cholesky factor.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    dim: usize,
    lower: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn smallest_pivot(&self) -> T {
        (0..self.dim)
            .map(|i| self.lower[i * self.dim + i])
            .fold(T::infinity(), T::min)
    }

    /// Solves `L y = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let d = self.dim;
        for i in 0..d {
            let mut s = b[i];
            for k in 0..i {
                s -= self.lower[i * d + k] * b[k];
            }
            b[i] = s / self.lower[i * d + i];
        }
    }

    /// Solves `L' y = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let d = self.dim;
        for i in (0..d).rev() {
            let mut s = b[i];
            for k in (i + 1)..d {
                s -= self.lower[k * d + i] * b[k];
            }
            b[i] = s / self.lower[i * d + i];
        }
    }

    /// Solves `(L L') x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }
}
