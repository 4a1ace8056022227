//! Dense complex Hermitian and real symmetric matrix utilities.
//!
//! Everything here is small and dense (at most a few hundred rows), so the
//! routines lean on `nalgebra` for storage and the symmetric eigensolver
//! (Householder tridiagonalization followed by implicit QR sweeps).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::POLICY;

pub type C64 = Complex64;

/// Square complex matrix, row-major semantics, dense storage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix(pub DMatrix<C64>);

/// Real symmetric matrix used as a positive-semidefinite cone block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealSymBlock(pub DMatrix<f64>);

impl CMatrix {
    pub fn zeros(dim: usize) -> Self {
        CMatrix(DMatrix::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        CMatrix(DMatrix::identity(dim, dim))
    }

    /// Builds a matrix from real entries given row by row.
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let n = rows.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j], 0.0)))
    }

    pub fn from_fn(dim: usize, f: impl FnMut(usize, usize) -> C64) -> Self {
        CMatrix(DMatrix::from_fn(dim, dim, f))
    }

    pub fn diag(values: &[f64]) -> Self {
        let n = values.len();
        CMatrix(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(values[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Rank-one projector `|v><v|` (v is not normalized here).
    pub fn outer(v: &DVector<C64>) -> Self {
        CMatrix(v * v.adjoint())
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Self {
        CMatrix(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        CMatrix(self.0.map(|z| z * s))
    }

    pub fn add(&self, other: &CMatrix) -> Self {
        CMatrix(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &CMatrix) -> Self {
        CMatrix(&self.0 - &other.0)
    }

    pub fn mul(&self, other: &CMatrix) -> Self {
        CMatrix(&self.0 * &other.0)
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.0[(i, j)] - self.0[(j, i)].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        let scale = self.0.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
        self.hermiticity_defect() <= POLICY.hermiticity * scale
    }

    fn require_hermitian(&self) -> Result<()> {
        if self.is_hermitian() {
            Ok(())
        } else {
            Err(Error::NotHermitian(self.hermiticity_defect()))
        }
    }

    /// `Tr(rho * self)` real part, for Hermitian operands.
    pub fn expectation(&self, rho: &CMatrix) -> f64 {
        (&rho.0 * &self.0).trace().re
    }
}

/// Kronecker product with the standard block convention
/// `(a ⊗ b)[i*db + k, j*db + l] = a[i,j] * b[k,l]`.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix(a.0.kronecker(&b.0))
}

/// Eigenvalues of a Hermitian matrix in ascending order.
pub fn herm_eigs(a: &CMatrix) -> Result<Vec<f64>> {
    Ok(herm_eigh(a)?.0)
}

/// Eigenvalues (ascending) and matching unit eigenvectors (as columns).
pub fn herm_eigh(a: &CMatrix) -> Result<(Vec<f64>, DMatrix<C64>)> {
    a.require_hermitian()?;
    let sym = CMatrix((&a.0 + a.0.adjoint()) * C64::new(0.5, 0.0));
    let eig = SymmetricEigen::new(sym.0);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(a.dim(), a.dim(), |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Operator norm of a Hermitian matrix: `max |λ|`.
pub fn max_abs_eig(a: &CMatrix) -> Result<f64> {
    let eigs = herm_eigs(a)?;
    Ok(eigs.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Real embedding `[[Re a, -Im a], [Im a, Re a]]` of a Hermitian matrix.
///
/// The embedding is symmetric and its spectrum is that of `a` with every
/// eigenvalue doubled in multiplicity, so `a ⪰ 0` iff the embedding is.
pub fn real_embed(a: &CMatrix) -> Result<RealSymBlock> {
    a.require_hermitian()?;
    let n = a.dim();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = a.0[(i, j)];
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    Ok(RealSymBlock(out))
}

impl RealSymBlock {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.dim();
        let scale = self.0.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        (0..n).all(|i| (i..n).all(|j| (self.0[(i, j)] - self.0[(j, i)]).abs() <= POLICY.hermiticity * scale))
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Vec<f64> {
        sym_eigs(&self.0)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn is_psd(&self) -> bool {
        self.min_eigenvalue() >= -POLICY.psd_slack
    }
}

/// Ascending eigenvalues of a real symmetric matrix.
pub fn sym_eigs(a: &DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let sym = (a + a.transpose()) * 0.5;
    let mut v: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Projection onto the PSD cone by clipping negative eigenvalues.
pub fn psd_project(a: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let clipped = eig.eigenvalues.map(|v| v.max(0.0));
    &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()
}
