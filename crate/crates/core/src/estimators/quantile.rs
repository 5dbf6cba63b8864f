//! Linear quantile regression by smoothed iteratively reweighted least squares.
//!
//! The check loss `ρ_τ(u) = u·(τ − 1{u<0})` is majorized at the current
//! residuals by a weighted quadratic with weights `c(u)/max(|u|, ε)`, where
//! `c(u)` is `τ` or `1 − τ` by the sign of `u`. The smoothing floor `ε`
//! halves every iteration until it reaches `1e-6` (in units of the response
//! scale).
//!
//! After every iteration the fit is snapped to the vertex interpolating the
//! `q` smallest residuals and improved by at most `q` basis exchanges. A
//! vertex at which no exchange lowers the check loss is an exact minimizer of
//! the linear-programming formulation, so iteration stops there as
//! converged. Otherwise it continues until the coefficient change drops below
//! `1e-8` at the floor, and a longer exchange run finishes the best iterate.

use nalgebra::{DMatrix, DVector};

use super::ols::with_constant;
use super::qr::PivotedQr;
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const COEFFICIENT_TOLERANCE: f64 = 1e-8;
/// Final smoothing parameter, relative to the response scale.
pub const SMOOTHING_FLOOR: f64 = 1e-6;
const SMOOTHING_START: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub tau: f64,
    pub coefficients: DVector<f64>,
    pub intercept: f64,
    /// Sum of check losses at the returned solution.
    pub objective: f64,
    pub residuals: DVector<f64>,
    pub iterations: usize,
    /// False when the iteration budget ran out; the best iterate seen is
    /// still returned.
    pub converged: bool,
}

/// Check loss `ρ_τ(u)`.
#[inline]
pub fn check_loss(u: f64, tau: f64) -> f64 {
    if u < 0.0 {
        u * (tau - 1.0)
    } else {
        u * tau
    }
}

pub fn check_objective(residuals: &DVector<f64>, tau: f64) -> f64 {
    residuals.iter().map(|&u| check_loss(u, tau)).sum()
}

/// Quantile regression of `y` on `x` plus an intercept at level `tau`.
///
/// `x` may have zero columns (intercept-only). Non-convergence is not an
/// error: inspect [`QuantileFit::converged`].
pub fn quantile_fit(x: &DMatrix<f64>, y: &DVector<f64>, tau: f64) -> Result<QuantileFit> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {tau} outside (0, 1)")));
    }
    let (t, m) = x.shape();
    if y.len() != t {
        return Err(Error::DimensionMismatch(format!("design has {t} rows, response has {}", y.len())));
    }
    if t <= m + 1 {
        return Err(Error::InsufficientData { required: m + 2, actual: t });
    }
    let design = with_constant(x);
    let q = design.ncols();
    let qr = PivotedQr::new(&design);
    qr.check_rank()?;
    let mut beta = qr.solve_vec(y.as_slice());

    let mean = y.mean();
    let scale = (y.iter().map(|v| (v - mean).abs()).sum::<f64>() / t as f64).max(f64::MIN_POSITIVE);
    let floor = SMOOTHING_FLOOR * scale;
    let mut eps = SMOOTHING_START * scale;

    let mut resid = y - &design * &beta;
    let mut best_obj = check_objective(&resid, tau);
    let mut best_beta = beta.clone();
    let mut converged = false;
    let mut iterations = 0;
    let mut weighted = DMatrix::zeros(t, q);
    let mut rhs = vec![0.0; t];

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        for r in 0..t {
            let u = resid[r];
            let side = if u < 0.0 { 1.0 - tau } else { tau };
            let w = (side / u.abs().max(eps)).sqrt();
            for c in 0..q {
                weighted[(r, c)] = design[(r, c)] * w;
            }
            rhs[r] = y[r] * w;
        }
        let next = PivotedQr::new(&weighted).solve_vec(&rhs);
        if next.iter().any(|v| !v.is_finite()) {
            break;
        }
        let change = (&next - &beta).amax();
        beta = next;
        resid = y - &design * &beta;
        let obj = check_objective(&resid, tau);
        if obj < best_obj {
            best_obj = obj;
            best_beta = beta.clone();
        }
        if let Some((b, obj, true)) = vertex_descent(&design, y, &beta, tau, q) {
            best_obj = obj;
            best_beta = b;
            converged = true;
            break;
        }
        let at_floor = eps <= floor;
        eps = (eps * 0.5).max(floor);
        if at_floor && change < COEFFICIENT_TOLERANCE {
            converged = true;
            break;
        }
    }

    if !converged {
        if let Some((b, obj, optimal)) = vertex_descent(&design, y, &best_beta, tau, 10 * t) {
            if obj <= best_obj {
                best_obj = obj;
                best_beta = b;
                converged = optimal;
            }
        }
    }

    let residuals = y - &design * &best_beta;
    Ok(QuantileFit {
        tau,
        intercept: best_beta[0],
        coefficients: best_beta.rows(1, m).into_owned(),
        objective: best_obj,
        residuals,
        iterations,
        converged,
    })
}

/// Indices of the `q` smallest absolute residuals, ties to the lower index.
fn vertex_basis(resid: &DVector<f64>, q: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..resid.len()).collect();
    order.sort_by(|&a, &b| resid[a].abs().total_cmp(&resid[b].abs()).then(a.cmp(&b)));
    order.truncate(q);
    order
}

/// Basis-exchange descent on the check loss, started from the vertex
/// through the `q` smallest residuals at `beta`.
///
/// At a vertex with basis `h`, freeing basis row `j` moves `β` along
/// `δ = ±X_h^{-1}e_j`. The directional slope is piecewise linear in the step,
/// so the best step is found by walking the residual sign changes in order;
/// the observation where the slope turns nonnegative enters the basis. When
/// no free direction has negative slope the vertex is an exact minimizer and
/// the third field is `true`.
fn vertex_descent(
    design: &DMatrix<f64>,
    y: &DVector<f64>,
    beta: &DVector<f64>,
    tau: f64,
    max_pivots: usize,
) -> Option<(DVector<f64>, f64, bool)> {
    let (n, q) = design.shape();
    let mut basis = vertex_basis(&(y - design * beta), q);
    let mut in_basis = vec![false; n];
    for &i in &basis {
        in_basis[i] = true;
    }
    let mut pivots = 0;
    loop {
        let sub = design.select_rows(&basis);
        let inv = sub.try_inverse()?;
        let rhs = DVector::from_iterator(q, basis.iter().map(|&i| y[i]));
        let b = &inv * rhs;
        let mut resid = y - design * &b;
        for &i in &basis {
            resid[i] = 0.0;
        }
        // Steepest admissible direction over (basis row, sign).
        let mut best: Option<(f64, usize, f64, DVector<f64>)> = None;
        for j in 0..q {
            let u = design * inv.column(j);
            let mut up = 1.0 - tau;
            let mut down = tau;
            let mut mass = 0.0;
            for i in 0..n {
                if in_basis[i] {
                    continue;
                }
                let (r, ui) = (resid[i], u[i]);
                mass += ui.abs();
                if r > 0.0 {
                    up -= tau * ui;
                    down += tau * ui;
                } else if r < 0.0 {
                    up += (1.0 - tau) * ui;
                    down -= (1.0 - tau) * ui;
                } else if ui > 0.0 {
                    up += (1.0 - tau) * ui;
                    down += tau * ui;
                } else {
                    up -= tau * ui;
                    down -= (1.0 - tau) * ui;
                }
            }
            let tol = 1e-10 * (1.0 + mass);
            for (slope, sign) in [(up, 1.0), (down, -1.0)] {
                if slope < -tol && best.as_ref().map_or(true, |bst| slope < bst.0) {
                    best = Some((slope, j, sign, u.clone()));
                }
            }
        }
        let Some((slope, j, sign, u)) = best else {
            let obj = check_objective(&resid, tau);
            return Some((b, obj, true));
        };
        if pivots == max_pivots {
            let obj = check_objective(&resid, tau);
            return Some((b, obj, false));
        }
        pivots += 1;
        // Residual i changes sign at step t_i = r_i / (sign·u_i).
        let mut kinks: Vec<(f64, usize)> = (0..n)
            .filter(|&i| !in_basis[i] && u[i] != 0.0)
            .filter_map(|i| {
                let t = resid[i] / (sign * u[i]);
                (t > 0.0).then_some((t, i))
            })
            .collect();
        kinks.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut running = slope;
        let mut entering = None;
        for &(_, i) in &kinks {
            running += u[i].abs();
            if running >= 0.0 {
                entering = Some(i);
                break;
            }
        }
        let i = entering?;
        in_basis[basis[j]] = false;
        in_basis[i] = true;
        basis[j] = i;
    }
}
