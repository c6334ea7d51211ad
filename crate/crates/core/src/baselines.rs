//! Promotion-blind reference forecasters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Simple exponential smoothing fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SesFit {
    pub alpha: f64,
    /// Final smoothed level, which is also the flat forecast.
    pub level: f64,
    /// In-sample sum of squared one-step errors.
    pub sse: f64,
}

/// One-step-ahead SES forecasts: entry `t` forecasts `series[t]` from data up
/// to `t - 1`; entry 0 is the initial level (the first observation). The
/// returned vector has `len + 1` entries, the last being the final level.
pub fn ses_one_step(series: &[f64], alpha: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len() + 1);
    let Some(&first) = series.first() else {
        return out;
    };
    let mut level = first;
    out.push(first);
    for &x in &series[1..] {
        out.push(level);
        level += alpha * (x - level);
    }
    out.push(level);
    out
}

fn ses_sse(series: &[f64], alpha: f64) -> (f64, f64) {
    let mut level = series[0];
    let mut sse = 0.0;
    for &x in &series[1..] {
        let e = x - level;
        sse += e * e;
        level += alpha * e;
    }
    (sse, level)
}

/// Choose alpha by minimizing the one-step SSE: a grid over 0.01..=1.00 in
/// steps of 0.01, refined by golden-section search around the best point.
pub fn ses_fit(series: &[f64]) -> Result<SesFit> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "SES needs at least 3 observations, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite value in SES input".into()));
    }
    let mut best_alpha = 0.01;
    let mut best_sse = f64::INFINITY;
    for i in 1..=100 {
        let alpha = i as f64 / 100.0;
        let (sse, _) = ses_sse(series, alpha);
        if sse < best_sse {
            best_sse = sse;
            best_alpha = alpha;
        }
    }
    let (mut lo, mut hi) = ((best_alpha - 0.01).max(0.01), (best_alpha + 0.01).min(1.0));
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - ratio * (hi - lo);
    let mut d = lo + ratio * (hi - lo);
    let (mut fc, mut fd) = (ses_sse(series, c).0, ses_sse(series, d).0);
    for _ in 0..60 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - ratio * (hi - lo);
            fc = ses_sse(series, c).0;
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + ratio * (hi - lo);
            fd = ses_sse(series, d).0;
        }
    }
    let refined = 0.5 * (lo + hi);
    let (sse_refined, _) = ses_sse(series, refined);
    if sse_refined < best_sse {
        best_sse = sse_refined;
        best_alpha = refined;
    }
    let (sse, level) = ses_sse(series, best_alpha);
    debug_assert_eq!(sse, best_sse);
    Ok(SesFit {
        alpha: best_alpha,
        level,
        sse,
    })
}

/// Flat forecast at the final level.
pub fn ses_forecast(fit: &SesFit, h: usize) -> Result<Vec<f64>> {
    if h == 0 {
        return Err(Error::InvalidInput(
            "forecast horizon must be positive".into(),
        ));
    }
    Ok(vec![fit.level; h])
}

/// Repeat the last observation.
pub fn naive_forecast(series: &[f64], h: usize) -> Result<Vec<f64>> {
    let last = *series
        .last()
        .ok_or_else(|| Error::InsufficientData("naive forecast of an empty series".into()))?;
    if h == 0 {
        return Err(Error::InvalidInput(
            "forecast horizon must be positive".into(),
        ));
    }
    Ok(vec![last; h])
}

/// SES baseline that ignores event weeks: alpha is fitted on the non-event
/// observations only and the level is held (not updated) through event
/// weeks, so the baseline does not absorb event uplift. Entry `t` is the
/// forecast for week `t` made at `t - 1`.
pub fn event_cleansed_baseline(series: &[f64], event_mask: &[bool]) -> Result<Vec<f64>> {
    if series.len() != event_mask.len() {
        return Err(Error::Dimension(format!(
            "{} observations but {} event flags",
            series.len(),
            event_mask.len()
        )));
    }
    let quiet: Vec<f64> = series
        .iter()
        .zip(event_mask)
        .filter(|(_, &e)| !e)
        .map(|(x, _)| *x)
        .collect();
    if quiet.is_empty() {
        return Err(Error::InsufficientData(
            "no non-event weeks for a baseline".into(),
        ));
    }
    let alpha = if quiet.len() >= 3 {
        ses_fit(&quiet)?.alpha
    } else {
        1.0
    };
    let mut level = quiet[0];
    let mut out = Vec::with_capacity(series.len());
    let mut started = false;
    for (&x, &ev) in series.iter().zip(event_mask) {
        out.push(level);
        if !ev {
            if started {
                level += alpha * (x - level);
            } else {
                started = true;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_series() {
        let f = ses_fit(&[7.0; 10]).unwrap();
        assert_eq!(f.alpha, 0.01);
        assert_eq!(f.level, 7.0);
        assert_eq!(ses_forecast(&f, 4).unwrap(), vec![7.0; 4]);
    }

    #[test]
    fn alpha_one_is_naive() {
        let x = [3.0, 5.0, 4.0, 8.0];
        let f = ses_one_step(&x, 1.0);
        assert_eq!(&f[1..4], &x[0..3]);
        assert_eq!(f[4], naive_forecast(&x, 1).unwrap()[0]);
    }

    #[test]
    fn flat_forecast() {
        let f = SesFit {
            alpha: 0.3,
            level: 450.0,
            sse: 0.0,
        };
        assert_eq!(ses_forecast(&f, 3).unwrap(), vec![450.0; 3]);
        assert!(ses_forecast(&f, 0).is_err());
    }

    #[test]
    fn naive_cases() {
        assert_eq!(naive_forecast(&[1.0, 2.0, 3.0], 2).unwrap(), vec![3.0, 3.0]);
        assert!(naive_forecast(&[], 2).is_err());
    }

    #[test]
    fn one_step_matches_fit_sse() {
        let x = [5.0, 7.0, 6.0, 9.0, 8.0, 10.0];
        let f = ses_fit(&x).unwrap();
        let one = ses_one_step(&x, f.alpha);
        let sse: f64 = (1..x.len()).map(|t| (x[t] - one[t]).powi(2)).sum();
        assert!((sse - f.sse).abs() < 1e-9);
        assert!((one[x.len()] - f.level).abs() < 1e-12);
    }

    #[test]
    fn cleansed_baseline_holds_level_through_events() {
        let x = [10.0, 10.0, 500.0, 10.0, 10.0];
        let b = event_cleansed_baseline(&x, &[false, false, true, false, false]).unwrap();
        assert!(b.iter().all(|v| (v - 10.0).abs() < 1e-12));
    }

    #[test]
    fn too_short() {
        assert!(ses_fit(&[1.0, 2.0]).is_err());
    }
}
