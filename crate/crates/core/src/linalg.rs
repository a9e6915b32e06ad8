//! Dense helpers shared by the estimator, risk and constraint modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative tolerance below which negative eigenvalues are treated as
/// round-off and clipped to zero.
pub const PSD_REL_TOL: f64 = 1e-10;

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Exact symmetry up to a relative tolerance on the largest entry.
pub fn is_symmetric(m: &DMatrix<f64>, rel_tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            if (m[(i, j)] - m[(j, i)]).abs() > rel_tol * scale {
                return false;
            }
        }
    }
    true
}

/// Smallest eigenvalue relative to the largest eigenvalue magnitude.
fn eigen_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let min = eig.eigenvalues.min();
    let scale = eig.eigenvalues.amax();
    (min, scale)
}

/// Accepts `m` as positive semidefinite when every eigenvalue is at least
/// `-PSD_REL_TOL * max|eigenvalue|`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return true;
    }
    let (min, scale) = eigen_extremes(m);
    min.is_finite() && min >= -PSD_REL_TOL * scale
}

pub fn is_pd(m: &DMatrix<f64>) -> bool {
    if m.is_empty() {
        return true;
    }
    let (min, scale) = eigen_extremes(m);
    min.is_finite() && min > PSD_REL_TOL * scale
}

/// Symmetrizes and clips negative eigenvalues to zero.
pub fn clip_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    if eig.eigenvalues.iter().all(|&l| l >= 0.0) {
        return symmetrize(m);
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose()))
}

/// Symmetric square root of a PSD matrix, negative eigenvalues clipped.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    if m.is_empty() {
        return m.clone();
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    symmetrize(&(&eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()))
}

pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ra, ca) = a.shape();
    let (rb, cb) = b.shape();
    let mut out = DMatrix::zeros(ra + rb, ca + cb);
    out.view_mut((0, 0), (ra, ca)).copy_from(a);
    out.view_mut((ra, ca), (rb, cb)).copy_from(b);
    out
}

pub fn vstack(a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.len() + b.len());
    out.rows_mut(0, a.len()).copy_from(a);
    out.rows_mut(a.len(), b.len()).copy_from(b);
    out
}

/// Quadratic form `x^T m x`.
pub fn quad_form(m: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    x.dot(&(m * x))
}
