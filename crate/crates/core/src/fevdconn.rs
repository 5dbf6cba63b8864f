//! Generalized FEVD connectedness for OLS VARs and quantile VARs.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::estimators::{lagged_design, quantile_fit, unstack, var_fit, VarModel};
use crate::panel::ReturnPanel;
use crate::table::{aggregate_indices, ConnectednessTable, SpilloverIndices};

pub const DEFAULT_HORIZON: usize = 10;
pub const DEFAULT_TAU: f64 = 0.5;

/// Moving-average matrices `A_0..A_{H−1}` with `A_0 = I` and
/// `A_h = Σ_{j=1..min(h,p)} Φ_j·A_{h−j}`.
pub fn ma_coefficients(model: &VarModel, horizon: usize) -> Result<Vec<DMatrix<f64>>> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
    }
    let k = model.n_series();
    let mut a: Vec<DMatrix<f64>> = Vec::with_capacity(horizon);
    a.push(DMatrix::identity(k, k));
    for h in 1..horizon {
        let mut next = DMatrix::zeros(k, k);
        for j in 1..=h.min(model.p) {
            next += &model.coeff[j - 1] * &a[h - j];
        }
        a.push(next);
    }
    Ok(a)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GfevdTable {
    pub labels: Vec<String>,
    pub horizon: usize,
    /// Row-normalized shares; `theta[(i, j)]` is the share of `i`'s forecast
    /// error variance due to shocks in `j`.
    pub theta: DMatrix<f64>,
    /// Shares before row normalization.
    pub unnormalized: DMatrix<f64>,
}

impl GfevdTable {
    /// `100·θ` as a connectedness table (no contemporaneous/lagged split).
    pub fn to_table(&self) -> ConnectednessTable {
        ConnectednessTable::from_total(self.labels.clone(), &self.theta * 100.0).expect("theta is K×K")
    }
}

/// Generalized forecast-error variance decomposition at horizon `H`.
pub fn gfevd(model: &VarModel, horizon: usize) -> Result<GfevdTable> {
    let a = ma_coefficients(model, horizon)?;
    let k = model.n_series();
    let sigma = &model.sigma;
    for j in 0..k {
        if !(sigma[(j, j)] > 0.0) {
            return Err(Error::ZeroVariance(model.labels[j].clone()));
        }
    }
    let mut num = DMatrix::<f64>::zeros(k, k);
    let mut den = DVector::<f64>::zeros(k);
    for ah in &a {
        let a_sigma = ah * sigma;
        for i in 0..k {
            for j in 0..k {
                num[(i, j)] += a_sigma[(i, j)].powi(2);
            }
            den[i] += a_sigma.row(i).dot(&ah.row(i));
        }
    }
    let mut unnormalized = DMatrix::zeros(k, k);
    for i in 0..k {
        if !(den[i] > 0.0) {
            return Err(Error::ZeroVariance(model.labels[i].clone()));
        }
        for j in 0..k {
            unnormalized[(i, j)] = num[(i, j)] / sigma[(j, j)] / den[i];
        }
    }
    let mut theta = unnormalized.clone();
    for mut row in theta.row_iter_mut() {
        let s = row.sum();
        row /= s;
    }
    Ok(GfevdTable { labels: model.labels.clone(), horizon, theta, unnormalized })
}

/// Output of the VAR-based engines.
#[derive(Debug, Clone, PartialEq)]
pub struct FevdConnectedness {
    pub model: VarModel,
    pub gfevd: GfevdTable,
    /// Percent table built from `gfevd.theta`.
    pub table: ConnectednessTable,
    pub indices: SpilloverIndices,
    /// Labels of quantile equations that hit the iteration cap.
    pub nonconverged: Vec<String>,
}

fn assemble(model: VarModel, horizon: usize, nonconverged: Vec<String>) -> Result<FevdConnectedness> {
    let g = gfevd(&model, horizon)?;
    let table = g.to_table();
    let indices = aggregate_indices(&table);
    Ok(FevdConnectedness { model, gfevd: g, table, indices, nonconverged })
}

/// Diebold–Yilmaz connectedness from an OLS VAR(p).
pub fn dy_connectedness(returns: &ReturnPanel, p: usize, horizon: usize) -> Result<FevdConnectedness> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
    }
    let model = var_fit(returns, p)?;
    assemble(model, horizon, Vec::new())
}

/// Quantile-VAR connectedness: each equation is a quantile regression at
/// `tau` on the VAR design; the residual covariance is the centered moment
/// covariance of the quantile residuals with denominator `T − p`.
pub fn qvar_connectedness(returns: &ReturnPanel, p: usize, horizon: usize, tau: f64) -> Result<FevdConnectedness> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("tau {tau} outside (0, 1)")));
    }
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be ≥ 1".into()));
    }
    if p == 0 {
        return Err(Error::InvalidParameter("lag order must be ≥ 1".into()));
    }
    let y = returns.returns();
    let (t, k) = y.shape();
    if t <= p || t - p <= k * p + 1 {
        return Err(Error::InsufficientData { required: k * p + 2 + p, actual: t });
    }
    let labels = returns.labels();
    let (z, resp) = lagged_design(y, p, p);
    let x = z.columns(1, k * p).into_owned();
    let n = resp.nrows();
    let mut b = DMatrix::zeros(1 + k * p, k);
    let mut resid = DMatrix::zeros(n, k);
    let mut nonconverged = Vec::new();
    for eq in 0..k {
        let fit = quantile_fit(&x, &resp.column(eq).into_owned(), tau).map_err(|e| e.in_equation(eq, &labels[eq]))?;
        if !fit.converged {
            log::warn!("quantile equation {} did not converge", labels[eq]);
            nonconverged.push(labels[eq].clone());
        }
        b[(0, eq)] = fit.intercept;
        b.view_mut((1, eq), (k * p, 1)).copy_from(&fit.coefficients);
        resid.set_column(eq, &fit.residuals);
    }
    let means = resid.row_mean();
    for mut row in resid.row_iter_mut() {
        row -= &means;
    }
    let sigma = resid.transpose() * &resid / n as f64;
    let (intercept, coeff) = unstack(&b, k, p);
    let model = VarModel::new(labels.to_vec(), intercept, coeff, sigma)?;
    assemble(model, horizon, nonconverged)
}
