//! Statistical primitives: least squares, tail probabilities and the
//! hypothesis tests used for diagnostics and factor screening.

mod anova;
mod distribution;
mod kpss;
mod ljung_box;
mod normality;
mod ols;
pub mod special;
mod welch;

use serde::{Deserialize, Serialize};

pub use anova::{anova_factor_screen, FactorColumn, FactorEffect, FactorScreen};
pub use distribution::{
    cap_p_value, t_quantile_upper, tail_probability, two_sided_t, Distribution, P_VALUE_FLOOR,
};
pub use kpss::{default_kpss_lag, kpss_test, KPSS_CRITICAL_VALUES};
pub use ljung_box::{default_ljung_box_lag, ljung_box, sample_autocorrelations};
pub use normality::normality_test;
pub(crate) use ols::rank_aware_sse;
pub use ols::{ols_fit, Matrix, RegressionFit};
pub use welch::welch_t_test;

/// Outcome of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(with = "crate::serde_nonfinite::scalar")]
    pub statistic: f64,
    /// Absent for KPSS, which decides against tabulated critical values.
    pub p_value: Option<f64>,
    pub reject_at_5pct: bool,
    pub meta: TestMeta,
}

/// Test-specific parameters.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TestMeta {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub lags: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub df: Option<f64>,
    /// Interpolated from the KPSS table, clamped to [0.01, 0.10].
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub approx_p_value: Option<f64>,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub degenerate: bool,
}

impl TestResult {
    pub(crate) fn with_p(statistic: f64, p: f64, meta: TestMeta) -> Self {
        let p = cap_p_value(p);
        TestResult {
            statistic,
            p_value: Some(p),
            reject_at_5pct: p < 0.05,
            meta,
        }
    }
}

/// Arithmetic mean with one correction pass, so that demeaned values sum to
/// zero to working precision even for large offsets.
pub(crate) fn mean(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    m + x.iter().map(|v| v - m).sum::<f64>() / n
}

/// Unbiased sample variance; NaN for fewer than two values.
pub(crate) fn sample_variance(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}
