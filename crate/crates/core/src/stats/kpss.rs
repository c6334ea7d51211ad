use super::{mean, TestMeta, TestResult};
use crate::error::{Error, Result};

/// Level-stationarity critical values as (upper-tail probability, value).
pub const KPSS_CRITICAL_VALUES: [(f64, f64); 4] =
    [(0.10, 0.347), (0.05, 0.463), (0.025, 0.574), (0.01, 0.739)];

/// `floor(4 * (n / 100)^(1/4))`.
pub fn default_kpss_lag(n: usize) -> usize {
    (4.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

fn interpolate_p(stat: f64) -> f64 {
    let table = KPSS_CRITICAL_VALUES;
    if stat <= table[0].1 {
        return table[0].0;
    }
    for w in table.windows(2) {
        let (p0, c0) = w[0];
        let (p1, c1) = w[1];
        if stat <= c1 {
            return p0 + (p1 - p0) * (stat - c0) / (c1 - c0);
        }
    }
    table[3].0
}

/// KPSS test of level stationarity with a Bartlett-kernel long-run variance.
pub fn kpss_test(series: &[f64], lag_truncation: Option<usize>) -> Result<TestResult> {
    let n = series.len();
    if n < 20 {
        return Err(Error::InsufficientData(format!(
            "KPSS needs at least 20 observations, got {n}"
        )));
    }
    let lags = lag_truncation
        .unwrap_or_else(|| default_kpss_lag(n))
        .min(n - 1);
    let m = mean(series);
    let e: Vec<f64> = series.iter().map(|x| x - m).collect();
    let nf = n as f64;
    let gamma0 = e.iter().map(|v| v * v).sum::<f64>() / nf;
    let scale = series.iter().fold(0.0_f64, |a, x| a.max(x.abs())).max(1.0);
    if gamma0 <= (1e-14 * scale).powi(2) {
        return Ok(TestResult {
            statistic: 0.0,
            p_value: None,
            reject_at_5pct: false,
            meta: TestMeta {
                lags: Some(lags),
                approx_p_value: Some(0.10),
                degenerate: true,
                ..TestMeta::default()
            },
        });
    }
    let mut lrv = gamma0;
    for l in 1..=lags {
        let gamma: f64 = (l..n).map(|t| e[t] * e[t - l]).sum::<f64>() / nf;
        lrv += 2.0 * (1.0 - l as f64 / (lags as f64 + 1.0)) * gamma;
    }
    let mut partial = 0.0;
    let mut eta = 0.0;
    for v in &e {
        partial += v;
        eta += partial * partial;
    }
    let statistic = eta / (nf * nf * lrv);
    Ok(TestResult {
        statistic,
        p_value: None,
        reject_at_5pct: statistic > KPSS_CRITICAL_VALUES[1].1,
        meta: TestMeta {
            lags: Some(lags),
            approx_p_value: Some(interpolate_p(statistic)),
            ..TestMeta::default()
        },
    })
}
