//! Two-mode density operators on the truncated Fock basis.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::TwoModePureState;

/// Negative eigenvalues above this are clamped to zero; below it is an error.
pub const EIGENVALUE_CLAMP: f64 = 1e-10;
const HERMITIAN_TOL: f64 = 1e-10;

/// Basis `(m, n)` with `m + n <= cutoff`, ordered by total photon number and
/// then by `m`.
pub fn fock_basis(cutoff: usize) -> Vec<(usize, usize)> {
    (0..=cutoff)
        .flat_map(|total| (0..=total).map(move |m| (m, total - m)))
        .collect()
}

#[derive(Debug, Clone)]
pub struct TwoModeMixedState {
    cutoff: usize,
    basis: Vec<(usize, usize)>,
    matrix: DMatrix<Complex64>,
}

/// Spectral decomposition with eigenvalues clamped at zero.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: DMatrix<Complex64>,
}

impl TwoModeMixedState {
    /// Checks Hermiticity against the basis implied by `cutoff`.
    pub fn from_matrix(cutoff: usize, matrix: DMatrix<Complex64>) -> Result<Self> {
        let basis = fock_basis(cutoff);
        if matrix.nrows() != basis.len() || matrix.ncols() != basis.len() {
            return Err(Error::Invalid(format!(
                "density matrix is {}x{}, basis has {} states",
                matrix.nrows(),
                matrix.ncols(),
                basis.len()
            )));
        }
        let scale = matrix.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1.0);
        let mut deviation = 0.0f64;
        for i in 0..basis.len() {
            for j in 0..=i {
                deviation = deviation.max((matrix[(i, j)] - matrix[(j, i)].conj()).norm());
            }
        }
        if deviation > HERMITIAN_TOL * scale {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self { cutoff, basis, matrix })
    }

    pub fn from_pure(state: &TwoModePureState) -> Self {
        Self::from_ensemble(state.cutoff(), [(1.0, state)])
    }

    /// `sum_k p_k |psi_k><psi_k|`; the weights are used as given.
    pub fn from_ensemble<'a>(cutoff: usize, members: impl IntoIterator<Item = (f64, &'a TwoModePureState)>) -> Self {
        let basis = fock_basis(cutoff);
        let dim = basis.len();
        let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (weight, psi) in members {
            let v = DVector::from_iterator(dim, basis.iter().map(|&(m, n)| psi.amplitude(m, n)));
            matrix += (&v * v.adjoint()) * Complex64::new(weight, 0.0);
        }
        Self { cutoff, basis, matrix }
    }

    /// Diagonal state with `weight(m, n)` on `|m,n><m,n|`.
    pub fn diagonal(cutoff: usize, weight: impl Fn(usize, usize) -> f64) -> Self {
        let basis = fock_basis(cutoff);
        let dim = basis.len();
        let mut matrix = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (i, &(m, n)) in basis.iter().enumerate() {
            matrix[(i, i)] = Complex64::new(weight(m, n), 0.0);
        }
        Self { cutoff, basis, matrix }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn basis(&self) -> &[(usize, usize)] {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn element(&self, row: (usize, usize), col: (usize, usize)) -> Complex64 {
        let find = |key| self.basis.iter().position(|&b| b == key);
        match (find(row), find(col)) {
            (Some(i), Some(j)) => self.matrix[(i, j)],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        self.matrix.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace() - 1.0).abs() <= 1e-10
    }

    pub fn normalized(&self) -> Result<Self> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(Error::Invalid(format!("cannot normalize state with trace {tr}")));
        }
        Ok(Self {
            cutoff: self.cutoff,
            basis: self.basis.clone(),
            matrix: self.matrix.map(|z| z / tr),
        })
    }

    /// Eigendecomposition; eigenvalues in `(-1e-10, 0)` are clamped to zero.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let eig = SymmetricEigen::new(self.matrix.clone());
        let mut values = Vec::with_capacity(eig.eigenvalues.len());
        for &p in eig.eigenvalues.iter() {
            if p < -EIGENVALUE_CLAMP {
                return Err(Error::NegativeEigenvalue { value: p });
            }
            values.push(p.max(0.0));
        }
        Ok(Spectrum {
            values,
            vectors: eig.eigenvectors,
        })
    }
}

impl Spectrum {
    /// `sum_i p_i |e_i><e_i|`.
    pub fn reconstruct(&self) -> DMatrix<Complex64> {
        let dim = self.vectors.nrows();
        let mut out = DMatrix::from_element(dim, dim, Complex64::new(0.0, 0.0));
        for (i, &p) in self.values.iter().enumerate() {
            let v = self.vectors.column(i);
            out += (v * v.adjoint()) * Complex64::new(p, 0.0);
        }
        out
    }
}
