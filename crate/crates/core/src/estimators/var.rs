use nalgebra::{Complex, DMatrix, DVector};

use super::qr::least_squares;
use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

/// Reduced-form VAR(p) `y_t = c + Σ_l A_l·y_{t−l} + u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct VarModel {
    pub p: usize,
    pub labels: Vec<String>,
    /// `A_1..A_p`; `coeff[l][(i, j)]` is the effect of series `j` at lag
    /// `l + 1` on series `i`.
    pub coeff: Vec<DMatrix<f64>>,
    pub intercept: DVector<f64>,
    /// Residual covariance.
    pub sigma: DMatrix<f64>,
    /// Largest eigenvalue modulus of the companion matrix. Values ≥ 1 flag an
    /// unstable fit; nothing is rejected on that basis.
    pub spectral_radius: f64,
}

impl VarModel {
    /// Assembles a model from known parameters, computing the spectral radius.
    pub fn new(
        labels: Vec<String>,
        intercept: DVector<f64>,
        coeff: Vec<DMatrix<f64>>,
        sigma: DMatrix<f64>,
    ) -> Result<Self> {
        let k = labels.len();
        if coeff.is_empty() {
            return Err(Error::InvalidParameter("VAR needs at least one lag".into()));
        }
        if intercept.len() != k || sigma.shape() != (k, k) || coeff.iter().any(|a| a.shape() != (k, k)) {
            return Err(Error::DimensionMismatch(format!("VAR parameters inconsistent with {k} series")));
        }
        let spectral_radius = companion_spectral_radius(&coeff);
        Ok(VarModel { p: coeff.len(), labels, coeff, intercept, sigma, spectral_radius })
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn is_stable(&self) -> bool {
        self.spectral_radius < 1.0
    }
}

/// Spectral radius of the `Kp × Kp` companion matrix of `A_1..A_p`.
pub fn companion_spectral_radius(coeff: &[DMatrix<f64>]) -> f64 {
    let k = coeff[0].nrows();
    let p = coeff.len();
    let mut comp = DMatrix::zeros(k * p, k * p);
    for (l, a) in coeff.iter().enumerate() {
        comp.view_mut((0, l * k), (k, k)).copy_from(a);
    }
    for i in k..k * p {
        comp[(i, i - k)] = 1.0;
    }
    comp.complex_eigenvalues().iter().map(|c: &Complex<f64>| c.norm()).fold(0.0, f64::max)
}

/// Lagged design `[1, y_{t−1}, …, y_{t−p}]` for rows `t = start..T` and the
/// matching response block.
pub(crate) fn lagged_design(y: &DMatrix<f64>, p: usize, start: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (t, k) = y.shape();
    let n = t - start;
    let mut z = DMatrix::from_element(n, 1 + k * p, 1.0);
    for lag in 1..=p {
        for j in 0..k {
            let col = 1 + (lag - 1) * k + j;
            for r in 0..n {
                z[(r, col)] = y[(start + r - lag, j)];
            }
        }
    }
    (z, y.rows(start, n).into_owned())
}

/// Splits a stacked `(1 + Kp) × K` coefficient block into intercept and `A_l`.
pub(crate) fn unstack(b: &DMatrix<f64>, k: usize, p: usize) -> (DVector<f64>, Vec<DMatrix<f64>>) {
    let intercept = b.row(0).transpose();
    let coeff = (0..p).map(|l| b.rows(1 + l * k, k).transpose()).collect();
    (intercept, coeff)
}

fn check_feasible(t: usize, k: usize, p: usize) -> Result<()> {
    if p == 0 {
        return Err(Error::InvalidParameter("lag order must be ≥ 1".into()));
    }
    if t <= p || t - p <= k * p + 1 {
        return Err(Error::InsufficientData { required: k * p + 2 + p, actual: t });
    }
    Ok(())
}

/// Equation-by-equation OLS VAR(p) with intercept. `sigma` uses denominator
/// `T − p`.
pub fn var_fit(returns: &ReturnPanel, p: usize) -> Result<VarModel> {
    let y = returns.returns();
    let (t, k) = y.shape();
    check_feasible(t, k, p)?;
    let (z, resp) = lagged_design(y, p, p);
    let b = least_squares(&z, &resp)?;
    let resid = &resp - &z * &b;
    let sigma = resid.transpose() * &resid / (t - p) as f64;
    let (intercept, coeff) = unstack(&b, k, p);
    VarModel::new(returns.labels().to_vec(), intercept, coeff, sigma)
}

/// Residuals of a VAR fit on the sample it was estimated from.
pub fn var_residuals(model: &VarModel, returns: &ReturnPanel) -> DMatrix<f64> {
    let p = model.p;
    let k = model.n_series();
    let (z, resp) = lagged_design(returns.returns(), p, p);
    let mut b = DMatrix::zeros(1 + k * p, k);
    b.set_row(0, &model.intercept.transpose());
    for (l, a) in model.coeff.iter().enumerate() {
        b.rows_mut(1 + l * k, k).copy_from(&a.transpose());
    }
    resp - z * b
}

/// Lag order minimizing `ln det Σ_p + p·K²·ln(T_eff)/T_eff` over `1..=p_max`.
///
/// Every candidate is fitted on the same rows `p_max+1..T`. Ties go to the
/// smaller order.
pub fn select_lag_bic(returns: &ReturnPanel, p_max: usize) -> Result<usize> {
    let y = returns.returns();
    let (t, k) = y.shape();
    check_feasible(t, k, p_max)?;
    let t_eff = (t - p_max) as f64;
    let mut best = (f64::INFINITY, 1);
    for p in 1..=p_max {
        let (z, resp) = lagged_design(y, p, p_max);
        let b = least_squares(&z, &resp)?;
        let resid = &resp - &z * &b;
        let sigma = resid.transpose() * &resid / t_eff;
        let det = sigma.determinant();
        if !(det > 0.0) {
            return Err(Error::Singular(format!("residual covariance at lag {p} has determinant {det:e}")));
        }
        let bic = det.ln() + (p * k * k) as f64 * t_eff.ln() / t_eff;
        if bic < best.0 {
            best = (bic, p);
        }
    }
    Ok(best.1)
}
