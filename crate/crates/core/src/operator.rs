use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::lattice::Basis;

/// Dense one-particle operator in an orthonormal basis: momentum eigenstates, or
/// position sites `(L/M)^{D/2}|r_j⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    basis: Basis,
    matrix: DMatrix<C64>,
}

impl OperatorMatrix {
    pub fn new(basis: Basis, matrix: DMatrix<C64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::InvalidArgument(format!(
                "operator matrix must be square, got {}x{}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> Basis { self.basis }
    pub fn matrix(&self) -> &DMatrix<C64> { &self.matrix }
    pub fn into_matrix(self) -> DMatrix<C64> { self.matrix }
    pub fn dim(&self) -> usize { self.matrix.nrows() }
    pub fn trace(&self) -> C64 { self.matrix.trace() }

    pub fn require_basis(&self, basis: Basis) -> Result<()> {
        if self.basis != basis {
            return Err(Error::BasisMismatch { expected: basis, found: self.basis });
        }
        Ok(())
    }

    /// `max |A - A†|`.
    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.matrix - self.matrix.adjoint()))
    }

    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> Result<f64> {
        other.require_basis(self.basis)?;
        if other.dim() != self.dim() {
            return Err(Error::LatticeMismatch);
        }
        Ok(max_abs(&(&self.matrix - &other.matrix)))
    }
}

pub fn max_abs(m: &DMatrix<C64>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Largest off-diagonal modulus.
pub fn max_off_diagonal(m: &DMatrix<C64>) -> f64 {
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if i != j {
                worst = worst.max(m[(i, j)].norm());
            }
        }
    }
    worst
}
