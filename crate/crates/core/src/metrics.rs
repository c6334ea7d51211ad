//! Forecast error measures and the improvement percentage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn check_pair(forecasts: &[f64], actuals: &[f64]) -> Result<()> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Dimension(format!(
            "{} forecasts for {} actuals",
            forecasts.len(),
            actuals.len()
        )));
    }
    if forecasts.is_empty() {
        return Err(Error::InsufficientData("no forecast/actual pairs".into()));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(forecasts: &[f64], actuals: &[f64]) -> Result<f64> {
    check_pair(forecasts, actuals)?;
    Ok(forecasts
        .iter()
        .zip(actuals)
        .map(|(f, x)| (f - x).abs())
        .sum::<f64>()
        / forecasts.len() as f64)
}

/// Treatment of zero actuals in MAPE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroPolicy {
    /// Leave the period out of the average.
    #[default]
    Exclude,
    Error,
}

/// Mean absolute percentage error, in percent.
pub fn mape(forecasts: &[f64], actuals: &[f64], zero_policy: ZeroPolicy) -> Result<f64> {
    check_pair(forecasts, actuals)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for (t, (f, x)) in forecasts.iter().zip(actuals).enumerate() {
        if *x == 0.0 {
            if zero_policy == ZeroPolicy::Error {
                return Err(Error::InvalidInput(format!("zero actual at period {t}")));
            }
            continue;
        }
        sum += ((f - x) / x).abs();
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("every actual is zero".into()));
    }
    Ok(100.0 * sum / count as f64)
}

/// Reading of the scaled absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MsaeVariant {
    /// `sum |f - x| / sum x`.
    #[default]
    RatioOfSums,
    /// `(1/n) sum (|f - x| / T)` with `T = sum x` over the window.
    PaperLiteral,
}

/// Mean scaled absolute error: absolute errors scaled by total demand.
pub fn msae(forecasts: &[f64], actuals: &[f64], variant: MsaeVariant) -> Result<f64> {
    check_pair(forecasts, actuals)?;
    let total: f64 = actuals.iter().sum();
    if !(total > 0.0) {
        return Err(Error::InvalidInput(format!(
            "total demand must be positive, got {total}"
        )));
    }
    let abs_sum: f64 = forecasts
        .iter()
        .zip(actuals)
        .map(|(f, x)| (f - x).abs())
        .sum();
    Ok(match variant {
        MsaeVariant::RatioOfSums => abs_sum / total,
        MsaeVariant::PaperLiteral => abs_sum / total / forecasts.len() as f64,
    })
}

/// Absolute errors `|f - x|` and relative errors `(f - x) / x`; the relative
/// error is `None` where the actual is zero.
pub fn ae_re_series(forecasts: &[f64], actuals: &[f64]) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    if forecasts.len() != actuals.len() {
        return Err(Error::Dimension(format!(
            "{} forecasts for {} actuals",
            forecasts.len(),
            actuals.len()
        )));
    }
    Ok(forecasts
        .iter()
        .zip(actuals)
        .map(|(f, x)| ((f - x).abs(), (*x != 0.0).then(|| (f - x) / x)))
        .unzip())
}

/// Accuracy gain of `candidate` over `benchmark` in whole percent, rounded
/// half away from zero.
pub fn improvement(benchmark_error: f64, candidate_error: f64) -> Result<i64> {
    if !(benchmark_error > 0.0) {
        return Err(Error::InvalidInput(format!(
            "benchmark error must be positive, got {benchmark_error}"
        )));
    }
    Ok((100.0 * (benchmark_error - candidate_error) / benchmark_error).round() as i64)
}

/// Errors of one forecaster over an evaluation window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterAccuracy {
    pub name: String,
    pub mae: f64,
    pub mape: Option<f64>,
    pub msae: Option<f64>,
    pub ae: Vec<f64>,
    pub re: Vec<Option<f64>>,
}

impl ForecasterAccuracy {
    pub fn score(
        name: &str,
        forecasts: &[f64],
        actuals: &[f64],
        zero_policy: ZeroPolicy,
        variant: MsaeVariant,
    ) -> Result<Self> {
        let (ae, re) = ae_re_series(forecasts, actuals)?;
        Ok(Self {
            name: name.to_string(),
            mae: mae(forecasts, actuals)?,
            // undefined when every actual is zero or total demand is not positive
            mape: mape(forecasts, actuals, zero_policy).ok(),
            msae: msae(forecasts, actuals, variant).ok(),
            ae,
            re,
        })
    }

    pub fn metric(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Msae => self.msae,
            Metric::Mae => Some(self.mae),
            Metric::Mape => self.mape,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Metric {
    Msae,
    Mae,
    Mape,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Msae, Metric::Mae, Metric::Mape];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Msae => "MSAE",
            Metric::Mae => "MAE",
            Metric::Mape => "MAPE",
        }
    }
}

/// One row of an improvement table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementRow {
    pub metric: Metric,
    pub benchmark: String,
    pub candidate: String,
    pub benchmark_error: f64,
    pub candidate_error: f64,
    pub improvement_pct: i64,
}

/// Per-forecaster errors plus candidate-vs-benchmark improvements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub forecasters: Vec<ForecasterAccuracy>,
    pub improvements: Vec<ImprovementRow>,
}

impl AccuracyReport {
    pub fn forecaster(&self, name: &str) -> Option<&ForecasterAccuracy> {
        self.forecasters.iter().find(|f| f.name == name)
    }

    /// Improvement rows of `candidate` against each benchmark, for every
    /// metric defined on both sides.
    pub fn build(
        forecasters: Vec<ForecasterAccuracy>,
        candidate: &str,
        benchmarks: &[&str],
    ) -> Result<Self> {
        let cand = forecasters
            .iter()
            .find(|f| f.name == candidate)
            .ok_or_else(|| Error::InvalidInput(format!("no forecaster named {candidate}")))?;
        let mut improvements = Vec::new();
        for b in benchmarks {
            let bench = forecasters
                .iter()
                .find(|f| f.name == *b)
                .ok_or_else(|| Error::InvalidInput(format!("no forecaster named {b}")))?;
            for metric in Metric::ALL {
                if let (Some(be), Some(ce)) = (bench.metric(metric), cand.metric(metric)) {
                    if be > 0.0 {
                        improvements.push(ImprovementRow {
                            metric,
                            benchmark: bench.name.clone(),
                            candidate: cand.name.clone(),
                            benchmark_error: be,
                            candidate_error: ce,
                            improvement_pct: improvement(be, ce)?,
                        });
                    }
                }
            }
        }
        Ok(Self {
            forecasters,
            improvements,
        })
    }
}
