use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalue floor used when repairing indefinite correlation matrices.
pub const PSD_EIGEN_FLOOR: f64 = 1e-10;

pub(crate) fn max_asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::DimensionMismatch(format!("expected a square matrix, got {}×{}", m.nrows(), m.ncols())));
    }
    let asym = max_asymmetry(m);
    if asym > 1e-10 * m.amax().max(1.0) {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(())
}

/// Principal square root `V·Λ^{1/2}·V'` of a symmetric PSD matrix.
/// Negative eigenvalues (rounding noise) are clipped to zero.
pub fn symmetric_sqrt(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(m)?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let v = &eig.eigenvectors;
    Ok(v * DMatrix::from_diagonal(&roots) * v.transpose())
}

/// Nearest correlation-like PSD matrix: clip eigenvalues at
/// [`PSD_EIGEN_FLOOR`], then rescale to a unit diagonal.
///
/// The input is symmetrized first; the Frobenius repair distance is logged
/// at debug level.
pub fn nearest_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (out, distance) = nearest_psd_with_distance(m);
    if distance > 0.0 {
        log::debug!("nearest_psd repair distance {distance:.3e}");
    }
    out
}

/// As [`nearest_psd`], also returning the Frobenius distance to the input.
pub fn nearest_psd_with_distance(m: &DMatrix<f64>) -> (DMatrix<f64>, f64) {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let clipped = eig.eigenvalues.map(|l| l.max(PSD_EIGEN_FLOOR));
    let v = &eig.eigenvectors;
    let mut out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let scale: Vec<f64> = out.diagonal().iter().map(|d| 1.0 / d.sqrt()).collect();
    let n = out.nrows();
    for j in 0..n {
        for i in 0..n {
            out[(i, j)] *= scale[i] * scale[j];
        }
    }
    for i in 0..n {
        out[(i, i)] = 1.0;
    }
    // Symmetrize away the last rounding asymmetry.
    let out = (&out + out.transpose()) * 0.5;
    let distance = (&out - m).norm();
    (out, distance)
}

#[cfg(test)]
fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone()).eigenvalues.min()
}
