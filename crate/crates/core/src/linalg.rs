//! Dense Hermitian eigenvalue problems beyond 4x4.

use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

/// Row-major dense complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    dim: usize,
    data: Vec<num_complex::Complex64>,
}

impl HermitianMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![num_complex::Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(usize, usize) -> num_complex::Complex64,
    {
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(f(i, j));
            }
        }
        Self { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> num_complex::Complex64 {
        self.data[i * self.dim + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: num_complex::Complex64) {
        self.data[i * self.dim + j] = z;
    }

    pub fn as_slice(&self) -> &[num_complex::Complex64] {
        &self.data
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }

    /// Ascending eigenvalues after symmetrization. Fails if the matrix is not
    /// Hermitian within `tol`.
    pub fn eigenvalues(&self, tol: f64) -> Result<Vec<f64>> {
        let defect = self.hermiticity_defect();
        if !(defect <= tol) {
            return Err(Error::Precondition(format!(
                "matrix of dimension {} is not Hermitian: defect {defect:.3e}",
                self.dim
            )));
        }
        hermitian_eigenvalues(self.dim, |i, j| {
            let z = 0.5 * (self.get(i, j) + self.get(j, i).conj());
            c64::new(z.re, z.im)
        })
    }
}

/// Ascending eigenvalues of the Hermitian matrix with entries `f(i, j)`.
/// Only the lower triangle is read.
pub fn hermitian_eigenvalues<F>(dim: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, usize) -> c64,
{
    if dim == 0 {
        return Ok(Vec::new());
    }
    let m = Mat::<c64>::from_fn(dim, dim, |i, j| if i >= j { f(i, j) } else { c64::new(0.0, 0.0) });
    m.self_adjoint_eigenvalues(Side::Lower).map_err(|e| {
        Error::Numerical(format!(
            "Hermitian eigensolver failed on a {dim}x{dim} matrix: {e:?}"
        ))
    })
}

/// Runs dense factorizations single-threaded so results do not depend on
/// the thread count.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}
