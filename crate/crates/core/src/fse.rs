//! The event-aware autoregression: an AR(p) on demand plus one indicator per
//! demand uplift state.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, EventCalendar};
use crate::dus::StateMap;
use crate::error::{Error, Result};
use crate::stats::{
    default_ljung_box_lag, kpss_test, ljung_box, normality_test, ols_fit, Matrix, RegressionFit,
    TestResult,
};

/// One-hot state indicators, stored as the active state per week.
///
/// Storing a single optional label per row makes "at most one active state
/// per week" hold by construction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateDesign {
    m: usize,
    active: Vec<Option<usize>>,
}

impl StateDesign {
    pub fn new(m: usize, active: Vec<Option<usize>>) -> Result<Self> {
        if let Some(bad) = active.iter().flatten().find(|&&j| j == 0 || j > m) {
            return Err(Error::InvalidInput(format!(
                "state label {bad} outside 1..={m}"
            )));
        }
        Ok(Self { m, active })
    }

    /// `n` rows and no state columns.
    pub fn empty(n: usize) -> Self {
        Self {
            m: 0,
            active: vec![None; n],
        }
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn active(&self, row: usize) -> Option<usize> {
        self.active[row]
    }

    pub fn rows(&self) -> &[Option<usize>] {
        &self.active
    }

    /// Dense 0/1 matrix of size `len x m`.
    pub fn matrix(&self) -> Matrix {
        let mut s = Matrix::zeros(self.len(), self.m);
        for (r, a) in self.active.iter().enumerate() {
            if let Some(j) = a {
                s.set(r, j - 1, 1.0);
            }
        }
        s
    }

    /// Number of active weeks per state.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.m];
        for j in self.active.iter().flatten() {
            sums[j - 1] += 1;
        }
        sums
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> StateDesign {
        StateDesign {
            m: self.m,
            active: self.active[range].to_vec(),
        }
    }
}

/// Indicators for calendar weeks `week_range`.
pub fn build_state_design(
    calendar: &EventCalendar,
    state_map: &StateMap,
    week_range: std::ops::Range<usize>,
) -> Result<StateDesign> {
    if week_range.end > calendar.len() {
        return Err(Error::Dimension(format!(
            "week range ends at {} but the calendar has {} weeks",
            week_range.end,
            calendar.len()
        )));
    }
    let mut active = Vec::with_capacity(week_range.len());
    for i in week_range {
        active.push(match &calendar.events[i] {
            None => None,
            Some(ev) => {
                Some(
                    state_map
                        .state_of_event(ev)
                        .ok_or_else(|| Error::UnindexedCombination {
                            week: calendar.week(i).to_string(),
                            combination: ev.project(&state_map.factors).to_string(),
                        })?,
                )
            }
        });
    }
    StateDesign::new(state_map.m(), active)
}

/// Series after the stationarity check, with every KPSS result along the way.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityCheck {
    pub series: DemandSeries,
    pub trail: Vec<TestResult>,
}

/// KPSS at 5%; difference (lag 1) and retest up to `max_diff` times.
pub fn check_stationarity_and_difference(
    series: &DemandSeries,
    max_diff: usize,
) -> Result<StationarityCheck> {
    let mut current = series.clone();
    let mut trail = Vec::new();
    loop {
        let test = kpss_test(&current.values, None)?;
        let reject = test.reject_at_5pct;
        let statistic = test.statistic;
        trail.push(test);
        if !reject {
            return Ok(StationarityCheck {
                series: current,
                trail,
            });
        }
        if trail.len() > max_diff {
            return Err(Error::Nonstationary {
                differences: max_diff,
                statistic,
            });
        }
        current = current.difference();
    }
}

fn check_alignment(series: &DemandSeries, design: &StateDesign) -> Result<()> {
    if series.len() != design.len() {
        return Err(Error::Dimension(format!(
            "series has {} weeks but the state design has {} rows",
            series.len(),
            design.len()
        )));
    }
    Ok(())
}

/// Regression rows `start..n`: intercept, `p` lags, `m` indicators.
fn regression_design(
    x: &[f64],
    design: &StateDesign,
    p: usize,
    start: usize,
) -> Result<(Matrix, Vec<f64>)> {
    let n = x.len();
    let m = design.m();
    let mut dead: Vec<usize> = Vec::new();
    let mut used = vec![false; m];
    for t in start..n {
        if let Some(j) = design.active(t) {
            used[j - 1] = true;
        }
    }
    for (j, u) in used.iter().enumerate() {
        if !u {
            dead.push(j + 1);
        }
    }
    if !dead.is_empty() {
        return Err(Error::DeadStates { states: dead });
    }
    let k = 1 + p + m;
    let mut data = Vec::with_capacity((n - start) * k);
    for t in start..n {
        data.push(1.0);
        for i in 1..=p {
            data.push(x[t - i]);
        }
        for j in 1..=m {
            data.push(if design.active(t) == Some(j) {
                1.0
            } else {
                0.0
            });
        }
    }
    Ok((
        Matrix::from_row_major(n - start, k, data)?,
        x[start..].to_vec(),
    ))
}

/// Small-sample corrected AIC with `q = 1 + p + m + 1` (the variance counts).
pub fn aicc(sse: f64, n_eff: usize, n_coefficients: usize) -> Result<f64> {
    let q = (n_coefficients + 1) as f64;
    let n = n_eff as f64;
    if n - q - 1.0 <= 0.0 {
        return Err(Error::InsufficientData(format!(
            "{n_eff} rows cannot support {} parameters for AICc",
            n_coefficients + 1
        )));
    }
    let sse = sse.max(f64::MIN_POSITIVE);
    Ok(n * (sse / n).ln() + 2.0 * q + 2.0 * q * (q + 1.0) / (n - q - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AiccRow {
    pub p: usize,
    pub aicc: f64,
    pub sse: f64,
    pub n_eff: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub p: usize,
    pub table: Vec<AiccRow>,
}

/// Pick the AR order by AICc over `0..=p_max`, every candidate fitted on the
/// same rows `p_max..n`. Ties go to the smaller order.
pub fn select_order(
    series: &DemandSeries,
    design: &StateDesign,
    p_max: usize,
) -> Result<OrderSelection> {
    check_alignment(series, design)?;
    let n = series.len();
    if n <= p_max + design.m() + 3 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for p_max = {p_max} and {} states",
            design.m()
        )));
    }
    let mut table = Vec::with_capacity(p_max + 1);
    for p in 0..=p_max {
        let (x, y) = regression_design(&series.values, design, p, p_max)?;
        let reg = ols_fit(&x, &y)?;
        table.push(AiccRow {
            p,
            aicc: aicc(reg.sse, reg.n_obs, reg.n_params)?,
            sse: reg.sse,
            n_eff: reg.n_obs,
        });
    }
    let best = table.iter().fold(
        &table[0],
        |best, row| if row.aicc < best.aicc { row } else { best },
    );
    Ok(OrderSelection { p: best.p, table })
}

/// Residual diagnostics; a test that cannot run is left empty and noted in
/// the fit warnings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub kpss: Option<TestResult>,
    pub normality: Option<TestResult>,
    pub ljung_box: Option<TestResult>,
}

/// Fitted event-aware autoregression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FseFit {
    pub p: usize,
    pub m: usize,
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub residual_sigma: f64,
    pub regression: RegressionFit,
    pub aicc: f64,
    pub diagnostics: Diagnostics,
    pub differencing_applied: usize,
    /// Moduli of the companion-matrix eigenvalues; all below 1 for a
    /// stationary fitted polynomial.
    pub companion_moduli: Vec<f64>,
    pub warnings: Vec<String>,
}

impl FseFit {
    /// Total number of estimated coefficients, `1 + p + m`.
    pub fn n_coefficients(&self) -> usize {
        1 + self.p + self.m
    }
}

/// Moduli of the roots of `z^p - a_1 z^{p-1} - ... - a_p` (Durand-Kerner).
pub fn companion_moduli(alphas: &[f64]) -> Vec<f64> {
    let p = alphas.len();
    if p == 0 {
        return Vec::new();
    }
    // monic coefficients, highest degree first
    let mut coef = vec![Complex64::new(1.0, 0.0)];
    coef.extend(alphas.iter().map(|a| Complex64::new(-a, 0.0)));
    let eval = |z: Complex64| {
        coef.iter()
            .fold(Complex64::new(0.0, 0.0), |acc, c| acc * z + c)
    };
    let radius = 1.0 + alphas.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
    let seed = Complex64::new(0.4, 0.9);
    let mut roots: Vec<Complex64> = (0..p).map(|k| seed.powu(k as u32) * radius * 0.5).collect();
    for _ in 0..2000 {
        let mut delta = 0.0_f64;
        for i in 0..p {
            let zi = roots[i];
            let mut denom = Complex64::new(1.0, 0.0);
            for (j, zj) in roots.iter().enumerate() {
                if j != i {
                    denom *= zi - zj;
                }
            }
            if denom.norm() == 0.0 {
                denom = Complex64::new(1e-12, 0.0);
            }
            let step = eval(zi) / denom;
            roots[i] = zi - step;
            delta = delta.max(step.norm());
        }
        if delta < 1e-15 {
            break;
        }
    }
    roots.iter().map(|r| r.norm()).collect()
}

/// Estimate the model on rows `p..n` by least squares and run diagnostics.
pub fn fit(series: &DemandSeries, design: &StateDesign, p: usize) -> Result<FseFit> {
    check_alignment(series, design)?;
    let n = series.len();
    let m = design.m();
    if n < p + m + 2 {
        return Err(Error::InsufficientData(format!(
            "{n} observations for p = {p} and {m} states"
        )));
    }
    let (x, y) = regression_design(&series.values, design, p, p)?;
    let regression = ols_fit(&x, &y)?;
    let mut warnings = Vec::new();

    let companion = companion_moduli(&regression.coefficients[1..=p]);
    if let Some(max) = companion.iter().copied().reduce(f64::max) {
        if max >= 1.0 {
            warnings.push(format!(
                "fitted AR polynomial is not stationary (largest companion root modulus {max:.4})"
            ));
        }
    }

    let kpss = if n >= 20 {
        kpss_test(&series.values, None).ok()
    } else {
        warnings.push(format!("KPSS skipped: {n} observations"));
        None
    };
    let normality = match normality_test(&regression.residuals) {
        Ok(t) => Some(t),
        Err(e) => {
            warnings.push(format!("normality test skipped: {e}"));
            None
        }
    };
    let n_res = regression.residuals.len();
    let lag = default_ljung_box_lag(n_res).max(p + 1);
    let ljung = if lag < n_res {
        match ljung_box(&regression.residuals, lag, p) {
            Ok(t) => Some(t),
            Err(e) => {
                warnings.push(format!("Ljung-Box test skipped: {e}"));
                None
            }
        }
    } else {
        warnings.push(format!("Ljung-Box test skipped: {n_res} residuals"));
        None
    };

    let fit_aicc = aicc(regression.sse, regression.n_obs, regression.n_params).unwrap_or(f64::NAN);
    let residual_sigma = regression.sigma2().sqrt();
    let c = &regression.coefficients;
    Ok(FseFit {
        p,
        m,
        alpha0: c[0],
        alphas: c[1..=p].to_vec(),
        betas: c[p + 1..].to_vec(),
        residual_sigma,
        aicc: fit_aicc,
        diagnostics: Diagnostics {
            kpss,
            normality,
            ljung_box: ljung,
        },
        differencing_applied: series.differencing_applied,
        companion_moduli: companion,
        warnings,
        regression,
    })
}

/// Plain AR(p) with intercept: the model without state indicators.
pub fn fit_autoregression(series: &DemandSeries, p: usize) -> Result<FseFit> {
    fit(series, &StateDesign::empty(series.len()), p)
}

/// How lagged demand is filled in beyond the forecast origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForecastMode<'a> {
    /// Earlier forecasts feed the lags.
    Recursive,
    /// Realized actuals (original scale, one per horizon step) feed the lags.
    Rolling(&'a [f64]),
}

/// Forecast `future_design.len()` steps ahead of `last_observations`
/// (original scale; at least `p + differencing_applied` values).
pub fn forecast(
    fit: &FseFit,
    last_observations: &[f64],
    future_design: &StateDesign,
    mode: ForecastMode<'_>,
) -> Result<Vec<f64>> {
    let h = future_design.len();
    if h == 0 {
        return Err(Error::InvalidInput(
            "forecast horizon must be positive".into(),
        ));
    }
    if future_design.m() != fit.m {
        return Err(Error::Dimension(format!(
            "future design has {} states but the fit has {}",
            future_design.m(),
            fit.m
        )));
    }
    let d = fit.differencing_applied;
    let need = fit.p + d;
    if last_observations.len() < need {
        return Err(Error::InsufficientData(format!(
            "{} past observations for p = {} with {d} difference(s)",
            last_observations.len(),
            fit.p
        )));
    }
    if let ForecastMode::Rolling(actuals) = mode {
        if actuals.len() + 1 < h {
            return Err(Error::InsufficientData(format!(
                "rolling forecasts over {h} steps need {} actuals, got {}",
                h - 1,
                actuals.len()
            )));
        }
    }

    // levels[k] holds the k-times differenced history
    let mut levels: Vec<Vec<f64>> = vec![last_observations.to_vec()];
    for k in 1..=d {
        let prev = &levels[k - 1];
        levels.push(prev.windows(2).map(|w| w[1] - w[0]).collect());
    }

    let mut out = Vec::with_capacity(h);
    for step in 0..h {
        let hist = &levels[d];
        let mut y = fit.alpha0;
        for (i, a) in fit.alphas.iter().enumerate() {
            y += a * hist[hist.len() - 1 - i];
        }
        if let Some(j) = future_design.active(step) {
            y += fit.betas[j - 1];
        }
        // integrate back to the original scale
        let mut value = y;
        let mut integrated = vec![0.0; d + 1];
        integrated[d] = y;
        for k in (0..d).rev() {
            value += levels[k][levels[k].len() - 1];
            integrated[k] = value;
        }
        out.push(value);

        match mode {
            ForecastMode::Recursive => {
                for (k, v) in integrated.into_iter().enumerate() {
                    levels[k].push(v);
                }
            }
            ForecastMode::Rolling(actuals) => {
                if step + 1 == h {
                    break;
                }
                levels[0].push(actuals[step]);
                for k in 1..=d {
                    let prev = &levels[k - 1];
                    let v = prev[prev.len() - 1] - prev[prev.len() - 2];
                    levels[k].push(v);
                }
            }
        }
    }
    Ok(out)
}
