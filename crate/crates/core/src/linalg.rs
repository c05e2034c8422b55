//! Small dense linear-algebra helpers shared by the learner modules.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn sym_eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = symmetrize(m).symmetric_eigenvalues();
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

/// Diagonal (Jacobi) equilibration of a symmetric PSD matrix.
///
/// Returns `d` with `d_i = 1/sqrt(m_ii)` (zero where the diagonal vanishes)
/// and the scaled matrix `diag(d) m diag(d)`, which has unit diagonal on the
/// support of `m`.
pub fn equilibrate(m: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let d = DVector::from_iterator(
        m.nrows(),
        m.diagonal()
            .iter()
            .map(|&v| if v > 0.0 { 1.0 / v.sqrt() } else { 0.0 }),
    );
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| d[i] * m[(i, j)] * d[j]);
    (d, symmetrize(&scaled))
}

/// Smallest eigenvalue of the equilibrated matrix; a scale-free PE measure.
///
/// A zero diagonal entry means an identically-zero coordinate, which makes the
/// matrix singular regardless of the others.
pub fn normalized_min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.diagonal().iter().any(|&v| v <= 0.0) {
        return 0.0;
    }
    let (_, scaled) = equilibrate(m);
    sym_eig_extremes(&scaled).0
}

/// Number of singular values above `rel_tol` times the largest one.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 || !largest.is_finite() {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * largest).count()
}

/// Spectral radius of a square real matrix.
pub fn spectral_radius(m: &DMatrix<f64>) -> Result<f64> {
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical(
            "spectral radius of a non-finite matrix".into(),
        ));
    }
    let eig = m.complex_eigenvalues();
    let rho = eig.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if rho.is_finite() {
        Ok(rho)
    } else {
        Err(Error::Numerical("eigenvalue computation failed".into()))
    }
}

/// Stack `[I_n; K]`, an `(n+m) × n` matrix.
pub fn identity_over(k: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = k.shape();
    let mut out = DMatrix::zeros(n + m, n);
    out.view_mut((0, 0), (n, n)).fill_with_identity();
    out.view_mut((n, 0), (m, n)).copy_from(k);
    out
}

pub fn relative_error(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    (a - reference).norm() / (1.0 + reference.norm())
}
