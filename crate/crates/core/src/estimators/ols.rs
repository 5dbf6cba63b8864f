use nalgebra::{DMatrix, DVector};

use super::qr::PivotedQr;
use crate::error::{Error, Result};

/// Ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// Slope coefficients, one per design column.
    pub coefficients: DVector<f64>,
    /// Zero when fitted without an intercept.
    pub intercept: f64,
    pub residuals: DVector<f64>,
    /// `1 − SSR/SST`, centered when an intercept is fitted. Zero when SST is 0.
    pub r_squared: f64,
    /// `T·ln(SSR/T) + q·ln T` with `q` the number of fitted parameters.
    pub bic: f64,
    pub ssr: f64,
}

/// Prepends a column of ones.
pub(crate) fn with_constant(x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::from_element(x.nrows(), x.ncols() + 1, 1.0);
    d.columns_mut(1, x.ncols()).copy_from(x);
    d
}

/// Least-squares fit of `y` on the columns of `x`, via column-pivoted QR.
///
/// Fails with [`Error::RankDeficient`] when the smallest singular value of the
/// design (including the constant) is below `1e-10` times the largest.
pub fn ols_fit(x: &DMatrix<f64>, y: &DVector<f64>, with_intercept: bool) -> Result<LinearFit> {
    let (t, m) = x.shape();
    if y.len() != t {
        return Err(Error::DimensionMismatch(format!("design has {t} rows, response has {}", y.len())));
    }
    if t <= m + 1 {
        return Err(Error::InsufficientData { required: m + 2, actual: t });
    }
    let design = if with_intercept { with_constant(x) } else { x.clone() };
    let qr = PivotedQr::new(&design);
    qr.check_rank()?;
    let beta = qr.solve_vec(y.as_slice());
    let residuals = y - &design * &beta;
    let ssr = residuals.norm_squared();
    let sst = if with_intercept {
        let mean = y.mean();
        y.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
    } else {
        y.norm_squared()
    };
    let r_squared = if sst > 0.0 { (1.0 - ssr / sst).clamp(0.0, 1.0) } else { 0.0 };
    let params = design.ncols() as f64;
    let tf = t as f64;
    let bic = tf * (ssr / tf).ln() + params * tf.ln();
    let (intercept, coefficients) = if with_intercept { (beta[0], beta.rows(1, m).into_owned()) } else { (0.0, beta) };
    Ok(LinearFit { coefficients, intercept, residuals, r_squared, bic, ssr })
}
