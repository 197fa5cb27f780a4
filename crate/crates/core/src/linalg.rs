// SPDX-License-Identifier: MIT OR Apache-2.0

//! Dense square matrices of parameter dimension (a handful of rows), with a
//! Cholesky factorization. Sized for Newton steps and Fisher information, not
//! for large systems.

use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
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
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), dim, "matrix must be square");
            for (j, &v) in r.iter().enumerate() {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|v| *v = T::zero());
    }

    /// `self += w * x xᵀ`
    pub fn add_outer(&mut self, x: &[T], w: T) {
        debug_assert_eq!(x.len(), self.dim);
        for i in 0..self.dim {
            let wi = w * x[i];
            for j in 0..self.dim {
                self.data[i * self.dim + j] += wi * x[j];
            }
        }
    }

    pub fn add_assign(&mut self, other: &Matrix<T>) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn add_diagonal(&mut self, s: T) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += s;
        }
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * x[j]).sum())
            .collect()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()))
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    /// Cholesky factor `L` with `self = L Lᵀ`; `None` unless positive definite.
    pub fn cholesky(&self) -> Option<Cholesky<T>> {
        let d = self.dim;
        let mut l = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..=i {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s -= l[i * d + k] * l[j * d + k];
                }
                if i == j {
                    if !(s > T::zero()) || !s.is_finite() {
                        return None;
                    }
                    l[i * d + i] = s.sqrt();
                } else {
                    l[i * d + j] = s / l[j * d + j];
                }
            }
        }
        Some(Cholesky { dim: d, l })
    }
}

impl<T> std::ops::Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    dim: usize,
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Solves `L y = b`.
    pub fn forward(&self, b: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut y = b.to_vec();
        for i in 0..d {
            let mut s = y[i];
            for k in 0..i {
                s -= self.l[i * d + k] * y[k];
            }
            y[i] = s / self.l[i * d + i];
        }
        y
    }

    /// Solves `A x = b` for the factored `A`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let d = self.dim;
        let mut x = self.forward(b);
        for i in (0..d).rev() {
            let mut s = x[i];
            for k in i + 1..d {
                s -= self.l[k * d + i] * x[k];
            }
            x[i] = s / self.l[i * d + i];
        }
        x
    }

    /// `bᵀ A⁻¹ b`
    pub fn inv_quad(&self, b: &[T]) -> T {
        self.forward(b).iter().map(|&v| v * v).sum()
    }
}
