//! Descriptive statistics, normality and unit-root tests, correlations.

mod adf;
mod correlation;
mod moments;

use serde::{Deserialize, Serialize};

pub use adf::{adf_test, critical_values, schwert_max_lag, AdfResult, AdfSpec, LagRule, MIN_ADF_OBS};
pub use correlation::{
    average_ranks, correlation_matrix, correlation_of_columns, kendall_tau, significance_mask, CorrMethod,
    CorrelationMatrix, KendallTau,
};
pub use moments::{
    describe, jarque_bera, jarque_bera_from_moments, DescriptiveRow, JarqueBera, Moments, MIN_DESCRIBE_OBS, MIN_JB_OBS,
};

/// Conventional significance bands, rendered as `*`, `**`, `***`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Significance {
    None,
    Ten,
    Five,
    One,
}

impl Significance {
    pub fn from_p(p: f64) -> Self {
        if p < 0.01 {
            Significance::One
        } else if p < 0.05 {
            Significance::Five
        } else if p < 0.10 {
            Significance::Ten
        } else {
            Significance::None
        }
    }

    pub fn stars(self) -> &'static str {
        match self {
            Significance::None => "",
            Significance::Ten => "*",
            Significance::Five => "**",
            Significance::One => "***",
        }
    }
}
