//! Dirac-representation gamma matrices and spectral calculus on 4x4
//! Hermitian matrices.

use nalgebra::{Matrix2, Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// A 4x4 complex matrix acting on Dirac spinors.
pub type SpinorMatrix = Matrix4<Complex64>;

/// Default tolerance on `max |A - A^†|` for matrices fed to spectral calculus.
pub const HERM_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Pauli matrix `sigma^index` for index 1..=3.
pub fn pauli(index: usize) -> Result<Matrix2<Complex64>> {
    match index {
        1 => Ok(Matrix2::new(ZERO, ONE, ONE, ZERO)),
        2 => Ok(Matrix2::new(ZERO, -I, I, ZERO)),
        3 => Ok(Matrix2::new(ONE, ZERO, ZERO, -ONE)),
        _ => Err(Error::InvalidArgument(format!(
            "Pauli index must be 1, 2 or 3, got {index}"
        ))),
    }
}

/// Gamma matrix `gamma^index` in the Dirac representation:
/// `gamma^0 = diag(1, 1, -1, -1)` and `gamma^b = [[0, sigma^b], [-sigma^b, 0]]`.
pub fn gamma(index: usize) -> Result<SpinorMatrix> {
    let mut g = SpinorMatrix::zeros();
    match index {
        0 => {
            g[(0, 0)] = ONE;
            g[(1, 1)] = ONE;
            g[(2, 2)] = -ONE;
            g[(3, 3)] = -ONE;
        }
        1..=3 => {
            let s = pauli(index)?;
            for r in 0..2 {
                for c in 0..2 {
                    g[(r, c + 2)] = s[(r, c)];
                    g[(r + 2, c)] = -s[(r, c)];
                }
            }
        }
        _ => {
            return Err(Error::InvalidArgument(format!(
                "gamma index must be in 0..=3, got {index}"
            )))
        }
    }
    Ok(g)
}

/// Spin generator `Sigma^index = diag(sigma^index, sigma^index)`.
pub fn spin_generator(index: usize) -> Result<SpinorMatrix> {
    let s = pauli(index)?;
    let mut out = SpinorMatrix::zeros();
    for r in 0..2 {
        for c in 0..2 {
            out[(r, c)] = s[(r, c)];
            out[(r + 2, c + 2)] = s[(r, c)];
        }
    }
    Ok(out)
}

/// The four mutually anticommuting Hermitian involutions
/// `gamma^1 gamma^0, gamma^2 gamma^0, gamma^3 gamma^0, gamma^0`.
///
/// Every Dirac symbol is a real combination of the identity and these
/// four matrices, which makes its spectrum available in closed form.
pub fn clifford_basis() -> [SpinorMatrix; 4] {
    let g0 = gamma(0).unwrap();
    [
        gamma(1).unwrap() * g0,
        gamma(2).unwrap() * g0,
        gamma(3).unwrap() * g0,
        g0,
    ]
}

/// Entrywise `max |A - A^†|`.
pub fn hermiticity_defect(a: &SpinorMatrix) -> f64 {
    let mut worst = 0.0_f64;
    for r in 0..4 {
        for c in 0..4 {
            worst = worst.max((a[(r, c)] - a[(c, r)].conj()).norm());
        }
    }
    worst
}

/// Entrywise maximum modulus.
pub fn max_abs(a: &SpinorMatrix) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Frobenius norm squared.
pub fn frobenius_sq(a: &SpinorMatrix) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

fn hermitian_part(a: &SpinorMatrix, tol: f64) -> Result<SpinorMatrix> {
    let defect = hermiticity_defect(a);
    if !(defect <= tol) {
        return Err(Error::Precondition(format!(
            "matrix is not Hermitian: max |A - A^†| = {defect:.3e} exceeds {tol:.1e}"
        )));
    }
    Ok((a + a.adjoint()) * Complex64::new(0.5, 0.0))
}

/// Eigendecomposition `A = U diag(d) U^†` of a Hermitian matrix. Eigenvalues
/// come back in solver order (not sorted).
pub fn hermitian_eigen(a: &SpinorMatrix) -> Result<(Matrix4<Complex64>, [f64; 4])> {
    let h = hermitian_part(a, HERM_TOL)?;
    let eig = SymmetricEigen::try_new(h, 1e-15, 10_000).ok_or_else(|| {
        Error::Numerical(format!(
            "4x4 Hermitian eigensolver did not converge (input max entry {:.3e})",
            max_abs(&h)
        ))
    })?;
    let d = eig.eigenvalues;
    Ok((eig.eigenvectors, [d[0], d[1], d[2], d[3]]))
}

/// Spectrum of a Hermitian 4x4 matrix, ascending. Uses the closed form
/// when the matrix lies in the span of the identity and [`clifford_basis`].
pub fn hermitian_spectrum(a: &SpinorMatrix) -> Result<[f64; 4]> {
    if let Some(s) = clifford_spectrum(a) {
        return Ok(s);
    }
    let (_, mut d) = hermitian_eigen(a)?;
    d.sort_by(|x, y| x.total_cmp(y));
    Ok(d)
}

/// If `a = a0 + sum_i c_i Gamma_i` with real coefficients over the Clifford
/// basis, returns the spectrum `{a0 - |c|, a0 - |c|, a0 + |c|, a0 + |c|}`.
pub fn clifford_spectrum(a: &SpinorMatrix) -> Option<[f64; 4]> {
    let basis = clifford_basis();
    let a0 = a.trace() / 4.0;
    let mut recon = SpinorMatrix::identity() * a0;
    let mut norm_sq = 0.0;
    for g in &basis {
        let c = (a * g).trace() / 4.0;
        if c.im.abs() > 1e-14 * (1.0 + c.re.abs()) {
            return None;
        }
        recon += g * Complex64::new(c.re, 0.0);
        norm_sq += c.re * c.re;
    }
    if a0.im.abs() > 1e-14 * (1.0 + a0.re.abs()) {
        return None;
    }
    let scale = 1.0 + max_abs(a);
    if max_abs(&(a - recon)) > 1e-13 * scale {
        return None;
    }
    let c = norm_sq.sqrt();
    Some([a0.re - c, a0.re - c, a0.re + c, a0.re + c])
}

/// Spectral calculus: returns `U f(D) U^†` for Hermitian `A = U D U^†`.
///
/// The input is symmetrized after the Hermiticity check; eigenvalues are used
/// as returned by the solver, with no reordering or merging.
pub fn apply_matrix_function<F>(a: &SpinorMatrix, f: F) -> Result<SpinorMatrix>
where
    F: Fn(f64) -> f64,
{
    let (u, d) = hermitian_eigen(a)?;
    let mut fd = SpinorMatrix::zeros();
    for (i, &lambda) in d.iter().enumerate() {
        fd[(i, i)] = Complex64::new(f(lambda), 0.0);
    }
    Ok(u * fd * u.adjoint())
}
