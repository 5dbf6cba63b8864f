//! Estimation kernels shared by the connectedness engines.

mod linalg;
mod ols;
mod qr;
mod quantile;
mod var;

pub use linalg::{nearest_psd, nearest_psd_with_distance, symmetric_sqrt, PSD_EIGEN_FLOOR};
pub use ols::{ols_fit, LinearFit};
pub use qr::RANK_TOLERANCE;
pub use quantile::{
    check_loss, check_objective, quantile_fit, QuantileFit, COEFFICIENT_TOLERANCE, MAX_ITERATIONS, SMOOTHING_FLOOR,
};
pub use var::{companion_spectral_radius, select_lag_bic, var_fit, var_residuals, VarModel};

pub(crate) use qr::PivotedQr;
pub(crate) use var::{lagged_design, unstack};
