use serde::{Deserialize, Serialize};

use super::adf::{adf_test, AdfResult, AdfSpec, MIN_ADF_OBS};
use super::Significance;
use crate::error::{Error, Result};
use crate::panel::ReturnPanel;

/// Minimum series length accepted by [`describe`].
pub const MIN_DESCRIBE_OBS: usize = 20;
/// Minimum series length accepted by [`jarque_bera`].
pub const MIN_JB_OBS: usize = 8;

/// Sample moments accumulated in one pass (Pébay's update formulas).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub mean: f64,
    m2: f64,
    m3: f64,
    m4: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        let n1 = self.n as f64;
        self.n += 1;
        let n = self.n as f64;
        let delta = x - self.mean;
        let dn = delta / n;
        let dn2 = dn * dn;
        let term1 = delta * dn * n1;
        self.mean += dn;
        self.m4 += term1 * dn2 * (n * n - 3.0 * n + 3.0) + 6.0 * dn2 * self.m2 - 4.0 * dn * self.m3;
        self.m3 += term1 * dn * (n - 2.0) - 3.0 * dn * self.m2;
        self.m2 += term1;
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let mut m = Moments::default();
        for &v in x {
            m.push(v);
        }
        m
    }

    /// Sample standard deviation (denominator `n − 1`).
    pub fn sd(&self) -> f64 {
        (self.m2 / (self.n as f64 - 1.0)).sqrt()
    }

    /// Moment skewness `m3 / m2^{3/2}`.
    pub fn skewness(&self) -> f64 {
        let n = self.n as f64;
        n.sqrt() * self.m3 / self.m2.powf(1.5)
    }

    /// Raw (Pearson) kurtosis `m4 / m2²`; 3 for a Gaussian.
    pub fn kurtosis(&self) -> f64 {
        let n = self.n as f64;
        n * self.m4 / (self.m2 * self.m2)
    }

    pub fn is_constant(&self) -> bool {
        !(self.m2 > 0.0) || self.m2.sqrt() <= 1e-14 * self.mean.abs() * (self.n as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub stat: f64,
    pub p: f64,
}

/// Jarque–Bera statistic from sample size, skewness and raw kurtosis.
pub fn jarque_bera_from_moments(n: usize, skewness: f64, kurtosis: f64) -> JarqueBera {
    let excess = kurtosis - 3.0;
    let stat = n as f64 / 6.0 * (skewness * skewness + excess * excess / 4.0);
    // Survival function of χ²(2) is exp(−x/2).
    JarqueBera { stat, p: (-stat / 2.0).exp() }
}

/// Jarque–Bera normality test; `p` is the χ²(2) upper-tail probability.
pub fn jarque_bera(x: &[f64]) -> Result<JarqueBera> {
    if x.len() < MIN_JB_OBS {
        return Err(Error::InsufficientData { required: MIN_JB_OBS, actual: x.len() });
    }
    let m = Moments::from_slice(x);
    if m.is_constant() {
        return Err(Error::ConstantSeries("input".into()));
    }
    Ok(jarque_bera_from_moments(m.n, m.skewness(), m.kurtosis()))
}

/// One line of the descriptive-statistics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveRow {
    pub label: String,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub skewness: f64,
    /// Raw kurtosis (normal = 3).
    pub kurtosis: f64,
    pub jb_stat: f64,
    pub jb_p: f64,
    /// `None` when the series is shorter than the ADF minimum of 50.
    pub adf: Option<AdfResult>,
}

impl DescriptiveRow {
    pub fn jb_significance(&self) -> Significance {
        Significance::from_p(self.jb_p)
    }
}

/// Mean, SD, skewness, kurtosis, Jarque–Bera and ADF for every series.
pub fn describe(returns: &ReturnPanel, adf_spec: &AdfSpec) -> Result<Vec<DescriptiveRow>> {
    let t = returns.n_obs();
    if t < MIN_DESCRIBE_OBS {
        return Err(Error::InsufficientData { required: MIN_DESCRIBE_OBS, actual: t });
    }
    returns
        .labels()
        .iter()
        .enumerate()
        .map(|(k, label)| {
            let col = returns.column(k);
            let x = col.as_slice();
            let m = Moments::from_slice(x);
            if m.is_constant() {
                return Err(Error::ConstantSeries(label.clone()));
            }
            let jb = jarque_bera_from_moments(m.n, m.skewness(), m.kurtosis());
            let adf = if t >= MIN_ADF_OBS { Some(adf_test(x, adf_spec)?) } else { None };
            Ok(DescriptiveRow {
                label: label.clone(),
                n: m.n,
                mean: m.mean,
                sd: m.sd(),
                skewness: m.skewness(),
                kurtosis: m.kurtosis(),
                jb_stat: jb.stat,
                jb_p: jb.p,
                adf,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_three_points() {
        let m = Moments::from_slice(&[-1.0, 0.0, 1.0]);
        assert_eq!(m.mean, 0.0);
        assert_eq!(m.skewness(), 0.0);
        assert!((m.sd() - 1.0).abs() < 1e-15);
        // m2 = 2/3, m4 = 2/3 → kurtosis 1.5
        assert!((m.kurtosis() - 1.5).abs() < 1e-14);
    }

    #[test]
    fn jb_closed_forms() {
        let jb = jarque_bera_from_moments(600, 0.0, 3.0);
        assert_eq!(jb.stat, 0.0);
        assert_eq!(jb.p, 1.0);
        let jb = jarque_bera_from_moments(600, 1.0, 3.0);
        assert!((jb.stat - 100.0).abs() < 1e-12);
    }

    #[test]
    fn jb_rejects_constant_and_short() {
        assert!(matches!(jarque_bera(&[2.0; 10]), Err(Error::ConstantSeries(_))));
        assert!(matches!(jarque_bera(&[1.0, 2.0, 3.0]), Err(Error::InsufficientData { .. })));
    }

    #[test]
    fn describe_short_panel() {
        let r = ReturnPanel::from_matrix(nalgebra::DMatrix::from_fn(10, 1, |i, _| i as f64), vec!["a".into()]).unwrap();
        assert!(matches!(describe(&r, &AdfSpec::default()), Err(Error::InsufficientData { required: 20, .. })));
    }
}
