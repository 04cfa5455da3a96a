//! Dense symmetric matrices and their Cholesky factorization.
//!
//! Hessians in this crate are small (dimension up to a few hundred), so
//! everything is dense and exact; nalgebra does the factorizations.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// A dense symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.dim + j] = value;
        self.data[j * self.dim + i] = value;
    }

    /// self += c * v v^T
    pub fn add_scaled_outer(&mut self, v: &[f64], c: f64) {
        debug_assert_eq!(v.len(), self.dim);
        // compute each value once and mirror it, so the matrix stays
        // bitwise symmetric regardless of rounding
        for i in 0..self.dim {
            let ci = c * v[i];
            for j in i..self.dim {
                let w = ci * v[j];
                self.data[i * self.dim + j] += w;
                if i != j {
                    self.data[j * self.dim + i] += w;
                }
            }
        }
    }

    pub fn add_diagonal(&mut self, c: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += c;
        }
    }

    /// self += other (dimensions must match).
    pub fn add(&mut self, other: &SymMatrix) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        for a in &mut self.data {
            *a *= c;
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|i| {
                let row = &self.data[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(x).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    /// Largest relative asymmetry max |a_ij - a_ji| / max |a_ij|.
    pub fn symmetry_defect(&self) -> f64 {
        let scale = self
            .data
            .iter()
            .fold(0.0f64, |acc, &x| acc.max(x.abs()))
            .max(f64::MIN_POSITIVE);
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Smallest eigenvalue via a full symmetric eigendecomposition.
    pub fn min_eigenvalue(&self) -> f64 {
        let eig = self.to_nalgebra().symmetric_eigen();
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub(crate) fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }
}

/// Cholesky factorization of a positive-definite [`SymMatrix`], used to
/// apply the Hessian inverse exactly.
pub struct HessianFactor {
    chol: Cholesky<f64, Dyn>,
    dim: usize,
}

impl HessianFactor {
    /// Factor the matrix; fails with a numerical error if it is not
    /// positive definite (e.g. singular).
    pub fn new(matrix: &SymMatrix) -> Result<Self> {
        let chol = Cholesky::new(matrix.to_nalgebra()).ok_or_else(|| {
            Error::Numerical("Hessian is not positive definite; cannot factor".into())
        })?;
        Ok(HessianFactor {
            chol,
            dim: matrix.dim(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Solve H x = rhs.
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        debug_assert_eq!(rhs.len(), self.dim);
        let b = nalgebra::DVector::from_column_slice(rhs);
        self.chol.solve(&b).as_slice().to_vec()
    }
}
