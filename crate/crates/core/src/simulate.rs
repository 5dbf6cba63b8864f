//! Seeded synthetic return and price panels from planted VAR(1) structures.

use chrono::{Datelike, NaiveDate, Weekday};
use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::companion_spectral_radius;
use crate::panel::{PricePanel, ReturnPanel};

/// Discarded start-up draws so the process forgets its zero initial state.
pub const BURN_IN: usize = 200;

/// `y_t = A·y_{t−1} + e_t` with `e_t ~ N(0, sd²·R)` and `R` equicorrelated
/// at `noise_corr`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedVar {
    /// `coefficients[(i, j)]`: effect of `j` at `t−1` on `i` at `t`.
    pub coefficients: Vec<Vec<f64>>,
    pub noise_sd: f64,
    pub noise_corr: f64,
}

impl PlantedVar {
    /// Independent white noise.
    pub fn independent(k: usize, noise_sd: f64) -> Self {
        PlantedVar { coefficients: vec![vec![0.0; k]; k], noise_sd, noise_corr: 0.0 }
    }

    /// Adds lag-one coupling from `source` to `target`.
    pub fn with_edge(mut self, source: usize, target: usize, coefficient: f64) -> Self {
        self.coefficients[target][source] = coefficient;
        self
    }

    pub fn with_noise_corr(mut self, rho: f64) -> Self {
        self.noise_corr = rho;
        self
    }

    pub fn n_series(&self) -> usize {
        self.coefficients.len()
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let k = self.n_series();
        DMatrix::from_fn(k, k, |i, j| self.coefficients[i][j])
    }

    pub fn spectral_radius(&self) -> f64 {
        companion_spectral_radius(&[self.matrix()])
    }

    /// Checks shape, stability and that the noise correlation is admissible.
    pub fn validate(&self) -> Result<()> {
        let k = self.n_series();
        if k == 0 || self.coefficients.iter().any(|r| r.len() != k) {
            return Err(Error::DimensionMismatch("coefficient matrix must be K×K with K ≥ 1".into()));
        }
        if !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return Err(Error::InvalidParameter(format!("noise sd {} must be positive", self.noise_sd)));
        }
        let lower = if k > 1 { -1.0 / (k as f64 - 1.0) } else { -1.0 };
        if !(self.noise_corr > lower && self.noise_corr < 1.0) {
            return Err(Error::InvalidParameter(format!("noise correlation {} outside ({lower}, 1)", self.noise_corr)));
        }
        let radius = self.spectral_radius();
        if !(radius < 1.0) {
            return Err(Error::Unstable(radius));
        }
        Ok(())
    }

    fn noise_factor(&self) -> DMatrix<f64> {
        let k = self.n_series();
        let r = DMatrix::from_fn(k, k, |i, j| if i == j { 1.0 } else { self.noise_corr });
        let l = r.cholesky().expect("validated correlation is positive definite").l();
        l * self.noise_sd
    }
}

/// A planted structure held for `len` observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    pub var: PlantedVar,
    pub len: usize,
}

/// Simulates consecutive regimes on one seeded stream; the state carries
/// over between regimes. Returns a `Σ len × K` matrix.
pub fn simulate_regimes(regimes: &[Regime], seed: u64) -> Result<DMatrix<f64>> {
    let first = regimes.first().ok_or_else(|| Error::InvalidParameter("no regimes given".into()))?;
    let k = first.var.n_series();
    for r in regimes {
        r.var.validate()?;
        if r.var.n_series() != k {
            return Err(Error::DimensionMismatch("regimes differ in series count".into()));
        }
    }
    let total: usize = regimes.iter().map(|r| r.len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = DMatrix::zeros(total, k);
    let mut y = DVector::<f64>::zeros(k);
    let mut row = 0;
    for (idx, regime) in regimes.iter().enumerate() {
        let a = regime.var.matrix();
        let chol = regime.var.noise_factor();
        let burn = if idx == 0 { BURN_IN } else { 0 };
        for step in 0..burn + regime.len {
            let z = DVector::from_fn(k, |_, _| StandardNormal.sample(&mut rng));
            y = &a * &y + &chol * z;
            if step >= burn {
                out.set_row(row, &y.transpose());
                row += 1;
            }
        }
    }
    Ok(out)
}

/// `t` observations from one planted structure.
pub fn simulate_returns(spec: &PlantedVar, t: usize, seed: u64) -> Result<DMatrix<f64>> {
    simulate_regimes(&[Regime { var: spec.clone(), len: t }], seed)
}

/// `n` consecutive weekdays starting at the first weekday on or after `start`.
pub fn business_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start.iter_days().filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)).take(n).collect()
}

pub fn default_start_date() -> NaiveDate {
    NaiveDate::from_ymd_opt(2020, 12, 1).expect("valid date")
}

pub fn default_labels(k: usize) -> Vec<String> {
    (1..=k).map(|i| format!("S{i}")).collect()
}

/// Prices `start_price·exp(cumsum(returns))` with the start price as the
/// first row, dated on business days from `start`.
pub fn returns_to_prices(
    returns: &DMatrix<f64>,
    labels: Vec<String>,
    start: NaiveDate,
    start_price: f64,
) -> Result<PricePanel> {
    let (t, k) = returns.shape();
    let mut prices = DMatrix::zeros(t + 1, k);
    for j in 0..k {
        let mut log_p = start_price.ln();
        prices[(0, j)] = start_price;
        for i in 0..t {
            log_p += returns[(i, j)];
            prices[(i + 1, j)] = log_p.exp();
        }
    }
    PricePanel::new(business_days(start, t + 1), labels, prices)
}

/// Return panel on business days from [`default_start_date`].
pub fn simulated_panel(returns: DMatrix<f64>, labels: Vec<String>) -> Result<ReturnPanel> {
    let dates = business_days(default_start_date(), returns.nrows() + 1);
    ReturnPanel::new(dates[1..].to_vec(), labels, returns)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_draws() {
        let spec = PlantedVar::independent(3, 0.01).with_edge(0, 1, 0.4);
        let a = simulate_returns(&spec, 50, 7).unwrap();
        let b = simulate_returns(&spec, 50, 7).unwrap();
        let c = simulate_returns(&spec, 50, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unstable_rejected() {
        let spec = PlantedVar::independent(2, 1.0).with_edge(0, 0, 1.1);
        assert!(matches!(simulate_returns(&spec, 10, 1), Err(Error::Unstable(_))));
        let spec = PlantedVar::independent(3, 1.0).with_noise_corr(-0.6);
        assert!(simulate_returns(&spec, 10, 1).is_err());
    }

    #[test]
    fn prices_round_trip() {
        let spec = PlantedVar::independent(2, 0.02);
        let r = simulate_returns(&spec, 30, 3).unwrap();
        let p = returns_to_prices(&r, default_labels(2), default_start_date(), 100.0).unwrap();
        let back = crate::panel::compute_log_returns(&p).unwrap();
        assert!((back.returns() - &r).amax() < 1e-12);
        assert!(p.dates().iter().all(|d| d.weekday().number_from_monday() <= 5));
    }
}
