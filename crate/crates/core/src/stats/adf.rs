//! Augmented Dickey–Fuller test with a constant and no trend.
//!
//! Regression: `Δx_t = c + γ·x_{t−1} + Σ_{j=1..L} φ_j·Δx_{t−j} + e_t`; the
//! statistic is the t-ratio of `γ`. Critical values come from MacKinnon's
//! (2010) response surface for the constant-only case with one variable:
//!
//! | level | β∞        | β1      | β2      | β3      |
//! |-------|-----------|---------|---------|---------|
//! | 1%    | −3.43035  | −6.5393 | −16.786 | −79.433 |
//! | 5%    | −2.86154  | −2.8903 | −4.234  | −40.040 |
//! | 10%   | −2.56677  | −1.5384 | −2.809  | 0       |
//!
//! evaluated as `β∞ + β1/T + β2/T² + β3/T³` at the regression sample size `T`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Significance;
use crate::error::{Error, Result};
use crate::estimators::PivotedQr;

pub const MIN_ADF_OBS: usize = 50;

const MACKINNON_CONSTANT: [[f64; 4]; 3] =
    [[-3.43035, -6.5393, -16.786, -79.433], [-2.86154, -2.8903, -4.234, -40.040], [-2.56677, -1.5384, -2.809, 0.0]];

/// Two-sided 10% normal quantile used to prune augmentation lags.
const LAG_PRUNE_Z: f64 = 1.644_853_626_951_472_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LagRule {
    /// Exactly this many augmentation lags.
    Fixed(usize),
    /// Start at Schwert's `floor(12·(n/100)^{1/4})` and drop the last lag
    /// while its t-ratio is insignificant at 10%.
    SchwertPruned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdfSpec {
    pub lag_rule: LagRule,
}

impl Default for AdfSpec {
    fn default() -> Self {
        AdfSpec { lag_rule: LagRule::SchwertPruned }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub stat: f64,
    pub lags: usize,
    pub nobs: usize,
    /// Critical values at 1%, 5% and 10%.
    pub critical: [f64; 3],
    pub level: Significance,
}

/// Constant-case critical values (1%, 5%, 10%) at regression size `nobs`.
pub fn critical_values(nobs: usize) -> [f64; 3] {
    let t = nobs as f64;
    MACKINNON_CONSTANT.map(|b| b[0] + b[1] / t + b[2] / (t * t) + b[3] / (t * t * t))
}

pub fn schwert_max_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

struct AdfRegression {
    gamma_t: f64,
    last_lag_t: Option<f64>,
    nobs: usize,
}

/// Fits the ADF regression with `lags` augmentation terms on the rows
/// `start..` of the differenced series.
fn regress(x: &[f64], lags: usize, start: usize) -> Result<AdfRegression> {
    let dx: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let nobs = dx.len() - start;
    let cols = 2 + lags;
    if nobs <= cols + 1 {
        return Err(Error::InsufficientData { required: cols + 2 + start + 1, actual: x.len() });
    }
    let mut design = DMatrix::zeros(nobs, cols);
    let mut y = DVector::zeros(nobs);
    for r in 0..nobs {
        let j = start + r;
        y[r] = dx[j];
        design[(r, 0)] = 1.0;
        design[(r, 1)] = x[j];
        for l in 1..=lags {
            design[(r, 1 + l)] = dx[j - l];
        }
    }
    let qr = PivotedQr::new(&design);
    qr.check_rank()?;
    let beta = qr.solve_vec(y.as_slice());
    let resid = &y - &design * &beta;
    let ssr = resid.norm_squared();
    let scale = y.norm_squared().max(f64::MIN_POSITIVE);
    if ssr <= 1e-24 * scale {
        // Exact fit: no stochastic component, so no evidence against a unit root.
        return Ok(AdfRegression { gamma_t: 0.0, last_lag_t: lags.checked_sub(1).map(|_| 0.0), nobs });
    }
    let s2 = ssr / (nobs - cols) as f64;
    let inv = qr.inverse_gram_diagonal();
    let t_of = |i: usize| beta[i] / (s2 * inv[i]).sqrt();
    Ok(AdfRegression { gamma_t: t_of(1), last_lag_t: (lags > 0).then(|| t_of(1 + lags)), nobs })
}

/// Augmented Dickey–Fuller unit-root test (constant, no trend).
pub fn adf_test(x: &[f64], spec: &AdfSpec) -> Result<AdfResult> {
    let n = x.len();
    if n < MIN_ADF_OBS {
        return Err(Error::InsufficientData { required: MIN_ADF_OBS, actual: n });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("ADF input".into()));
    }
    let lags = match spec.lag_rule {
        LagRule::Fixed(l) => l,
        LagRule::SchwertPruned => {
            let max = schwert_max_lag(n);
            let mut chosen = 0;
            for l in (1..=max).rev() {
                // Common sample across candidates; collinear augmentations
                // (e.g. a deterministic trend) are skipped.
                match regress(x, l, max) {
                    Ok(fit) if fit.last_lag_t.is_some_and(|t| t.abs() >= LAG_PRUNE_Z) => {
                        chosen = l;
                        break;
                    }
                    Ok(_) | Err(Error::RankDeficient { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            chosen
        }
    };
    let fit = regress(x, lags, lags)?;
    let critical = critical_values(fit.nobs);
    let level = if fit.gamma_t < critical[0] {
        Significance::One
    } else if fit.gamma_t < critical[1] {
        Significance::Five
    } else if fit.gamma_t < critical[2] {
        Significance::Ten
    } else {
        Significance::None
    };
    Ok(AdfResult { stat: fit.gamma_t, lags, nobs: fit.nobs, critical, level })
}
