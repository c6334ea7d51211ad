//! Train/holdout evaluation of one case and Monte Carlo replication.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{event_cleansed_baseline, naive_forecast, ses_fit, ses_forecast, SesFit};
use crate::data::EventCombination;
use crate::dus::{run_dus, DusConfig, DusOutcome, StateMap};
use crate::error::{Error, Result};
use crate::fse::{
    build_state_design, check_stationarity_and_difference, fit, forecast, select_order,
    ForecastMode, FseFit, OrderSelection, StateDesign,
};
use crate::io::{fmt_sig, render_csv, DatasetBundle, ModeChoice};
use crate::metrics::{AccuracyReport, ForecasterAccuracy, Metric, MsaeVariant, ZeroPolicy};
use crate::stats::{t_quantile_upper, TestResult};
use crate::synth::{generate, make_company_shaped_spec, Shape};

pub const FSE: &str = "fse";
/// The fitted model with every holdout indicator switched off.
pub const AR: &str = "ar";
pub const SES: &str = "ses";
pub const NAIVE: &str = "naive";
pub const ADJUSTED: &str = "adjusted";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseConfig {
    /// Training weeks; `None` means everything but the last `holdout` weeks.
    pub train_length: Option<usize>,
    pub holdout: usize,
    pub dus: DusConfig,
    pub p_max: usize,
    pub max_diff: usize,
    pub forecast_mode: ModeChoice,
    pub msae_variant: MsaeVariant,
    pub zero_policy: ZeroPolicy,
}

impl Default for CaseConfig {
    fn default() -> Self {
        Self {
            train_length: None,
            holdout: 20,
            dus: DusConfig::default(),
            p_max: 8,
            max_diff: 1,
            forecast_mode: ModeChoice::Recursive,
            msae_variant: MsaeVariant::RatioOfSums,
            zero_policy: ZeroPolicy::Exclude,
        }
    }
}

impl CaseConfig {
    pub fn from_config(c: &crate::io::Config) -> Self {
        let d = Self::default();
        let mut dus = d.dus;
        if let Some(a) = c.alpha {
            dus.alpha = a;
            dus.merge.test_alpha = a;
        }
        if let Some(t) = c.fallback_rel_tol {
            dus.merge.fallback_rel_tol = t;
        }
        Self {
            train_length: c.train_length,
            holdout: c.holdout.unwrap_or(d.holdout),
            dus,
            p_max: c.p_max.unwrap_or(d.p_max),
            max_diff: c.max_diff.unwrap_or(d.max_diff),
            forecast_mode: c.forecast_mode.unwrap_or(d.forecast_mode),
            msae_variant: c.msae_variant.unwrap_or(d.msae_variant),
            zero_policy: c.mape_zero_policy.unwrap_or(d.zero_policy),
        }
    }

    /// Training length for a series of `n` weeks.
    pub fn resolve_train_length(&self, n: usize) -> Result<usize> {
        let t = match self.train_length {
            Some(t) => t,
            None => n.checked_sub(self.holdout).ok_or_else(|| {
                Error::Config(format!(
                    "holdout of {} weeks exceeds the {n}-week series",
                    self.holdout
                ))
            })?,
        };
        if t == 0 || t >= n {
            return Err(Error::Config(format!(
                "train_length {t} must lie in 1..{n}"
            )));
        }
        Ok(t)
    }
}

/// Output of the training stages, shared by `evaluate`, `fit` and `dus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub train_length: usize,
    pub stationarity: Vec<TestResult>,
    pub dus: Option<DusOutcome>,
    pub state_map: StateMap,
    pub order: OrderSelection,
    pub fit: FseFit,
    pub log: Vec<String>,
}

fn empty_map() -> StateMap {
    StateMap {
        factors: Vec::new(),
        states: Vec::new(),
    }
}

/// Baseline forecasts for the training weeks.
fn training_baseline(
    bundle: &DatasetBundle,
    t: usize,
    log: &mut Vec<String>,
) -> Result<Vec<Option<f64>>> {
    match &bundle.baseline_forecasts {
        Some(b) => {
            log.push("baseline: supplied forecasts".into());
            Ok(b[..t].to_vec())
        }
        None => {
            log.push("baseline: event-cleansed SES on the training weeks".into());
            let mask = bundle.calendar.event_mask();
            Ok(
                event_cleansed_baseline(&bundle.demand.values[..t], &mask[..t])?
                    .into_iter()
                    .map(Some)
                    .collect(),
            )
        }
    }
}

/// DUS on the training weeks only.
pub fn train_states(
    bundle: &DatasetBundle,
    t: usize,
    config: &CaseConfig,
    log: &mut Vec<String>,
) -> Result<Option<DusOutcome>> {
    let calendar = bundle.calendar.slice(0..t);
    if calendar.event_count() == 0 {
        log.push("dus: no events in the training window; fitting without states".into());
        return Ok(None);
    }
    let baseline = training_baseline(bundle, t, log).map_err(|e| e.in_stage("baseline"))?;
    let outcome = run_dus(
        &bundle.demand.slice(0..t),
        &baseline,
        &calendar,
        &bundle.factors,
        &config.dus,
    )
    .map_err(|e| e.in_stage("dus"))?;
    log.push(format!(
        "dus: {} state(s) from {} combination(s)",
        outcome.state_map.m(),
        outcome.state_map.k()
    ));
    Ok(Some(outcome))
}

/// State indicators for weeks `range`; all-off when there is no state map.
pub fn design_for(
    bundle: &DatasetBundle,
    map: &StateMap,
    range: std::ops::Range<usize>,
) -> Result<StateDesign> {
    if map.m() == 0 {
        return Ok(StateDesign::empty(range.len()));
    }
    build_state_design(&bundle.calendar, map, range)
}

/// Fit on weeks `0..t` with a given state map.
pub fn train_with_states(
    bundle: &DatasetBundle,
    t: usize,
    state_map: StateMap,
    dus: Option<DusOutcome>,
    config: &CaseConfig,
    mut log: Vec<String>,
) -> Result<TrainedModel> {
    let train = bundle.demand.slice(0..t);
    let check = check_stationarity_and_difference(&train, config.max_diff)
        .map_err(|e| e.in_stage("stationarity"))?;
    let d = check.series.differencing_applied - train.differencing_applied;
    log.push(format!("stationarity: {d} difference(s) applied"));
    let design = design_for(bundle, &state_map, d..t).map_err(|e| e.in_stage("design"))?;
    let order = select_order(&check.series, &design, config.p_max)
        .map_err(|e| e.in_stage("order selection"))?;
    log.push(format!("order selection: p = {}", order.p));
    let fitted = fit(&check.series, &design, order.p).map_err(|e| e.in_stage("fit"))?;
    for w in &fitted.warnings {
        log.push(format!("fit: warning: {w}"));
    }
    Ok(TrainedModel {
        train_length: t,
        stationarity: check.trail,
        dus,
        state_map,
        order,
        fit: fitted,
        log,
    })
}

/// Stationarity, DUS, order selection and fit on the training weeks.
pub fn train(bundle: &DatasetBundle, config: &CaseConfig) -> Result<TrainedModel> {
    let n = bundle.demand.len();
    let t = config.resolve_train_length(n)?;
    let mut log = vec![format!(
        "split: {t} training week(s), {} holdout week(s)",
        n - t
    )];
    let dus = train_states(bundle, t, config, &mut log)?;
    let map = dus.as_ref().map_or_else(empty_map, |o| o.state_map.clone());
    train_with_states(bundle, t, map, dus, config, log)
}

/// One holdout week of the plotted series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub week: String,
    pub actual: f64,
    pub fse_forecast: f64,
    pub benchmark_forecast: f64,
    pub ae: f64,
    pub re: Option<f64>,
    pub benchmark_ae: f64,
    pub benchmark_re: Option<f64>,
    pub ar_forecast: f64,
    pub ses_forecast: f64,
    pub state: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub config: CaseConfig,
    pub train_length: usize,
    pub holdout_length: usize,
    pub model: TrainedModel,
    pub ses: SesFit,
    /// Name of the forecaster in the `benchmark_*` series columns.
    pub benchmark: String,
    pub accuracy: AccuracyReport,
    pub series: Vec<SeriesRow>,
}

/// Train, forecast the holdout and score it.
pub fn run_case(bundle: &DatasetBundle, config: &CaseConfig) -> Result<CaseReport> {
    let model = train(bundle, config)?;
    let n = bundle.demand.len();
    let t = model.train_length;
    let h = n - t;
    let x = &bundle.demand.values;
    let actuals = &x[t..];

    let future = design_for(bundle, &model.state_map, t..n).map_err(|e| e.in_stage("forecast"))?;
    let mode = match config.forecast_mode {
        ModeChoice::Recursive => ForecastMode::Recursive,
        ModeChoice::Rolling => ForecastMode::Rolling(actuals),
    };
    let fse = forecast(&model.fit, &x[..t], &future, mode).map_err(|e| e.in_stage("forecast"))?;
    let off = StateDesign::new(model.fit.m, vec![None; h])?;
    let ar = forecast(&model.fit, &x[..t], &off, mode).map_err(|e| e.in_stage("forecast"))?;
    let ses = ses_fit(&x[..t]).map_err(|e| e.in_stage("benchmarks"))?;
    let ses_f = ses_forecast(&ses, h).map_err(|e| e.in_stage("benchmarks"))?;
    let naive = naive_forecast(&x[..t], h).map_err(|e| e.in_stage("benchmarks"))?;
    let adjusted: Option<Vec<f64>> = bundle
        .adjusted_forecasts
        .as_ref()
        .and_then(|a| a[t..].iter().copied().collect::<Option<Vec<f64>>>());

    let score = |name: &str, f: &[f64]| {
        ForecasterAccuracy::score(name, f, actuals, config.zero_policy, config.msae_variant)
    };
    let mut forecasters = vec![
        score(FSE, &fse)?,
        score(AR, &ar)?,
        score(SES, &ses_f)?,
        score(NAIVE, &naive)?,
    ];
    let mut benchmarks = vec![SES];
    if let Some(a) = &adjusted {
        forecasters.push(score(ADJUSTED, a)?);
        benchmarks.push(ADJUSTED);
    }
    let accuracy =
        AccuracyReport::build(forecasters, FSE, &benchmarks).map_err(|e| e.in_stage("scoring"))?;

    let bench: &[f64] = adjusted.as_deref().unwrap_or(&ses_f);
    let series = (0..h)
        .map(|i| {
            let (a, f, b) = (actuals[i], fse[i], bench[i]);
            SeriesRow {
                week: bundle.demand.week(t + i).to_string(),
                actual: a,
                fse_forecast: f,
                benchmark_forecast: b,
                ae: (f - a).abs(),
                re: (a != 0.0).then(|| (f - a) / a),
                benchmark_ae: (b - a).abs(),
                benchmark_re: (a != 0.0).then(|| (b - a) / a),
                ar_forecast: ar[i],
                ses_forecast: ses_f[i],
                state: future.active(i),
            }
        })
        .collect();
    Ok(CaseReport {
        config: config.clone(),
        train_length: t,
        holdout_length: h,
        model,
        ses,
        benchmark: if adjusted.is_some() { ADJUSTED } else { SES }.to_string(),
        accuracy,
        series,
    })
}

fn opt_num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn opt_sig(v: Option<f64>) -> String {
    v.map(fmt_sig).unwrap_or_else(|| "-".into())
}

fn coefficient_names(fit: &FseFit) -> Vec<String> {
    let mut names = vec!["alpha0".to_string()];
    names.extend((1..=fit.p).map(|i| format!("alpha{i}")));
    names.extend((1..=fit.m).map(|j| format!("beta{j}")));
    names
}

fn text_table(out: &mut String, header: &[&str], rows: &[Vec<String>]) {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (i, c) in r.iter().enumerate() {
            width[i] = width[i].max(c.len());
        }
    }
    let line = |cells: Vec<&str>| {
        cells
            .iter()
            .enumerate()
            .map(|(i, c)| format!("{c:>w$}", w = width[i]))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let _ = writeln!(out, "{}", line(header.to_vec()));
    for r in rows {
        let _ = writeln!(out, "{}", line(r.iter().map(String::as_str).collect()));
    }
}

fn members(c: &[EventCombination]) -> String {
    c.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join(" ")
}

impl CaseReport {
    fn state_rows(&self) -> Vec<(usize, String, f64, usize)> {
        self.model
            .state_map
            .states
            .iter()
            .map(|s| (s.label, members(&s.members), s.mean_uplift, s.sample_count))
            .collect()
    }

    fn diagnostics_rows(&self) -> Vec<(&'static str, &TestResult)> {
        let d = &self.model.fit.diagnostics;
        let mut rows: Vec<(&'static str, &TestResult)> = Vec::new();
        if let Some(k) = &d.kpss {
            rows.push(("kpss", k));
        }
        if let Some(k) = &d.normality {
            rows.push(("jarque_bera", k));
        }
        if let Some(k) = &d.ljung_box {
            rows.push(("ljung_box", k));
        }
        rows
    }

    /// Human-readable tables.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let fit = &self.model.fit;
        let _ = writeln!(
            out,
            "Training weeks: {}   Holdout weeks: {}",
            self.train_length, self.holdout_length
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Demand uplift states");
        let rows: Vec<Vec<String>> = self
            .state_rows()
            .into_iter()
            .map(|(l, m, u, c)| vec![l.to_string(), fmt_sig(u), c.to_string(), m])
            .collect();
        if rows.is_empty() {
            let _ = writeln!(out, "(none)");
        } else {
            text_table(
                &mut out,
                &["state", "mean_uplift", "samples", "combinations"],
                &rows,
            );
        }
        let _ = writeln!(out);
        let _ = writeln!(out, "AICc by order");
        let rows: Vec<Vec<String>> = self
            .model
            .order
            .table
            .iter()
            .map(|r| {
                vec![
                    r.p.to_string(),
                    fmt_sig(r.aicc),
                    if r.p == self.model.order.p {
                        "*".into()
                    } else {
                        String::new()
                    },
                ]
            })
            .collect();
        text_table(&mut out, &["p", "aicc", ""], &rows);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Coefficients (p = {}, m = {}, differences = {})",
            fit.p, fit.m, fit.differencing_applied
        );
        let r = &fit.regression;
        let rows: Vec<Vec<String>> = coefficient_names(fit)
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                vec![
                    n,
                    fmt_sig(r.coefficients[i]),
                    fmt_sig(r.standard_errors[i]),
                    fmt_sig(r.t_statistics[i]),
                    fmt_sig(r.p_values[i]),
                ]
            })
            .collect();
        text_table(
            &mut out,
            &["term", "estimate", "std_error", "t", "p_value"],
            &rows,
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Diagnostics");
        let rows: Vec<Vec<String>> = self
            .diagnostics_rows()
            .into_iter()
            .map(|(n, t)| {
                vec![
                    n.to_string(),
                    fmt_sig(t.statistic),
                    opt_sig(t.p_value.or(t.meta.approx_p_value)),
                    if t.reject_at_5pct {
                        "reject".into()
                    } else {
                        "accept".into()
                    },
                ]
            })
            .collect();
        text_table(
            &mut out,
            &["test", "statistic", "p_value", "at_5pct"],
            &rows,
        );
        let _ = writeln!(out);
        let _ = writeln!(out, "Accuracy");
        let rows: Vec<Vec<String>> = self
            .accuracy
            .forecasters
            .iter()
            .map(|f| {
                vec![
                    f.name.clone(),
                    opt_sig(f.msae),
                    fmt_sig(f.mae),
                    opt_sig(f.mape),
                ]
            })
            .collect();
        text_table(&mut out, &["forecaster", "MSAE", "MAE", "MAPE"], &rows);
        let _ = writeln!(out);
        let _ = writeln!(out, "Improvement");
        let rows: Vec<Vec<String>> = self
            .accuracy
            .improvements
            .iter()
            .map(|r| {
                vec![
                    r.metric.name().to_string(),
                    r.benchmark.clone(),
                    fmt_sig(r.benchmark_error),
                    fmt_sig(r.candidate_error),
                    format!("{}%", r.improvement_pct),
                ]
            })
            .collect();
        text_table(
            &mut out,
            &[
                "measure",
                "benchmark",
                "benchmark_error",
                "fse_error",
                "improvement",
            ],
            &rows,
        );
        out
    }

    /// Machine-readable files, rendered in memory.
    pub fn files(&self, dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
        let fit = &self.model.fit;
        let r = &fit.regression;
        let mut files = vec![
            (dir.join("report.txt"), self.render_text().into_bytes()),
            (dir.join("report.json"), serde_json::to_vec_pretty(self)?),
            (
                dir.join("states.csv"),
                render_csv(
                    &["state", "mean_uplift", "samples", "combinations"],
                    self.state_rows()
                        .into_iter()
                        .map(|(l, m, u, c)| vec![l.to_string(), u.to_string(), c.to_string(), m]),
                )?,
            ),
            (
                dir.join("coefficients.csv"),
                render_csv(
                    &["term", "estimate", "std_error", "t", "p_value"],
                    coefficient_names(fit)
                        .into_iter()
                        .enumerate()
                        .map(|(i, n)| {
                            vec![
                                n,
                                r.coefficients[i].to_string(),
                                r.standard_errors[i].to_string(),
                                r.t_statistics[i].to_string(),
                                r.p_values[i].to_string(),
                            ]
                        }),
                )?,
            ),
            (
                dir.join("aicc.csv"),
                render_csv(
                    &["p", "aicc", "sse", "n_eff"],
                    self.model.order.table.iter().map(|r| {
                        vec![
                            r.p.to_string(),
                            r.aicc.to_string(),
                            r.sse.to_string(),
                            r.n_eff.to_string(),
                        ]
                    }),
                )?,
            ),
            (
                dir.join("diagnostics.csv"),
                render_csv(
                    &[
                        "test",
                        "statistic",
                        "p_value",
                        "approx_p_value",
                        "lags",
                        "df",
                        "reject_at_5pct",
                    ],
                    self.diagnostics_rows().into_iter().map(|(n, t)| {
                        vec![
                            n.to_string(),
                            t.statistic.to_string(),
                            opt_num(t.p_value),
                            opt_num(t.meta.approx_p_value),
                            t.meta.lags.map(|l| l.to_string()).unwrap_or_default(),
                            opt_num(t.meta.df),
                            t.reject_at_5pct.to_string(),
                        ]
                    }),
                )?,
            ),
            (
                dir.join("accuracy.csv"),
                render_csv(
                    &[
                        "measure",
                        "benchmark",
                        "benchmark_error",
                        "fse_error",
                        "improvement_pct",
                    ],
                    self.accuracy.improvements.iter().map(|r| {
                        vec![
                            r.metric.name().to_string(),
                            r.benchmark.clone(),
                            r.benchmark_error.to_string(),
                            r.candidate_error.to_string(),
                            r.improvement_pct.to_string(),
                        ]
                    }),
                )?,
            ),
            (
                dir.join("series.csv"),
                render_csv(
                    &[
                        "week",
                        "actual",
                        "fse_forecast",
                        "benchmark_forecast",
                        "ae",
                        "re",
                        "benchmark_ae",
                        "benchmark_re",
                        "ar_forecast",
                        "ses_forecast",
                        "state",
                    ],
                    self.series.iter().map(|s| {
                        vec![
                            s.week.clone(),
                            s.actual.to_string(),
                            s.fse_forecast.to_string(),
                            s.benchmark_forecast.to_string(),
                            s.ae.to_string(),
                            opt_num(s.re),
                            s.benchmark_ae.to_string(),
                            opt_num(s.benchmark_re),
                            s.ar_forecast.to_string(),
                            s.ses_forecast.to_string(),
                            s.state.map(|j| j.to_string()).unwrap_or_default(),
                        ]
                    }),
                )?,
            ),
        ];
        let mut audit = self.model.log.join("\n");
        audit.push('\n');
        if let Some(d) = &self.model.dus {
            audit.push_str(&d.audit.to_string());
        }
        files.push((dir.join("audit.txt"), audit.into_bytes()));
        Ok(files)
    }
}

/// Monte Carlo settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateConfig {
    pub shape: Shape,
    pub first_seed: u64,
    pub case: CaseConfig,
}

/// Location summary across seeds (type-7 quantiles).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub q05: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub q95: f64,
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Summary> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Summary {
            n: v.len(),
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q05: quantile(&v, 0.05),
            q25: quantile(&v, 0.25),
            median: quantile(&v, 0.5),
            q75: quantile(&v, 0.75),
            q95: quantile(&v, 0.95),
        })
    }
}

/// Per-seed outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRun {
    pub seed: u64,
    pub p: usize,
    pub m: usize,
    pub partition_recovered: bool,
    /// Error per forecaster and metric.
    pub errors: BTreeMap<String, BTreeMap<Metric, f64>>,
    /// Whether each true coefficient lies in its 95% interval from a fit on
    /// the full series with the true order and states.
    pub covered: Vec<bool>,
    pub holdout_events: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageRow {
    pub term: String,
    pub truth: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub failures: Vec<(u64, String)>,
    pub metrics: BTreeMap<String, BTreeMap<Metric, Summary>>,
    pub p_frequency: BTreeMap<usize, usize>,
    pub coverage: Vec<CoverageRow>,
    pub partition_recovery_rate: f64,
    pub runs: Vec<SeedRun>,
}

fn partition(map: &StateMap) -> BTreeSet<BTreeSet<EventCombination>> {
    map.states
        .iter()
        .map(|s| s.members.iter().map(|c| c.project(&map.factors)).collect())
        .collect()
}

/// Same grouping of combinations, ignoring labels.
pub fn same_partition(a: &StateMap, b: &StateMap) -> bool {
    partition(a) == partition(b)
}

fn run_seed(config: &ReplicateConfig, seed: u64) -> Result<SeedRun> {
    let spec = make_company_shaped_spec(config.shape, seed);
    let synthetic = generate(&spec)?;
    let bundle = synthetic.to_dataset();
    let report = run_case(&bundle, &config.case)?;

    let design = synthetic.truth_design()?;
    let truth_fit = fit(&synthetic.demand, &design, spec.p)?;
    let r = &truth_fit.regression;
    let q = t_quantile_upper(0.025, r.df_resid() as f64)?;
    let mut truth = vec![spec.alpha0];
    truth.extend(&spec.alphas);
    truth.extend(&spec.betas);
    let covered = truth
        .iter()
        .enumerate()
        .map(|(i, b)| (r.coefficients[i] - b).abs() <= q * r.standard_errors[i])
        .collect();

    let errors = report
        .accuracy
        .forecasters
        .iter()
        .map(|f| {
            let m = Metric::ALL
                .iter()
                .filter_map(|&k| f.metric(k).map(|v| (k, v)))
                .collect();
            (f.name.clone(), m)
        })
        .collect();
    Ok(SeedRun {
        seed,
        p: report.model.order.p,
        m: report.model.state_map.m(),
        partition_recovered: same_partition(&report.model.state_map, &spec.state_map),
        errors,
        covered,
        holdout_events: bundle.calendar.events[report.train_length..]
            .iter()
            .flatten()
            .count(),
    })
}

/// Run `n_seeds` independent synthetic cases (seeds `first_seed..`) and
/// aggregate them. Seeds whose pipeline fails are listed, not aggregated.
pub fn replicate(config: &ReplicateConfig, n_seeds: usize) -> Result<Aggregate> {
    if n_seeds == 0 {
        return Err(Error::InvalidInput("n_seeds must be at least 1".into()));
    }
    let seeds: Vec<u64> = (0..n_seeds as u64).map(|i| config.first_seed + i).collect();
    let threads = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(n_seeds);
    let chunk = n_seeds.div_ceil(threads);
    let results: Vec<(u64, Result<SeedRun>)> = std::thread::scope(|s| {
        let handles: Vec<_> = seeds
            .chunks(chunk)
            .map(|part| {
                s.spawn(move || {
                    part.iter()
                        .map(|&seed| (seed, run_seed(config, seed)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("replicate worker panicked"))
            .collect()
    });
    let mut runs = Vec::new();
    let mut failures = Vec::new();
    for (seed, r) in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => failures.push((seed, e.to_string())),
        }
    }
    Ok(aggregate(seeds, runs, failures, config.shape))
}

/// Fold per-seed runs into summaries.
pub fn aggregate(
    seeds: Vec<u64>,
    runs: Vec<SeedRun>,
    failures: Vec<(u64, String)>,
    shape: Shape,
) -> Aggregate {
    let mut values: BTreeMap<String, BTreeMap<Metric, Vec<f64>>> = BTreeMap::new();
    let mut p_frequency = BTreeMap::new();
    for r in &runs {
        *p_frequency.entry(r.p).or_insert(0) += 1;
        for (name, m) in &r.errors {
            for (k, v) in m {
                values
                    .entry(name.clone())
                    .or_default()
                    .entry(*k)
                    .or_default()
                    .push(*v);
            }
        }
    }
    let metrics = values
        .into_iter()
        .map(|(name, m)| {
            (
                name,
                m.into_iter()
                    .filter_map(|(k, v)| Summary::of(&v).map(|s| (k, s)))
                    .collect(),
            )
        })
        .collect();
    let spec = make_company_shaped_spec(shape, 0);
    let mut terms = vec![("alpha0".to_string(), spec.alpha0)];
    terms.extend(
        spec.alphas
            .iter()
            .enumerate()
            .map(|(i, a)| (format!("alpha{}", i + 1), *a)),
    );
    terms.extend(
        spec.betas
            .iter()
            .enumerate()
            .map(|(j, b)| (format!("beta{}", j + 1), *b)),
    );
    let n = runs.len().max(1) as f64;
    let coverage = terms
        .into_iter()
        .enumerate()
        .map(|(i, (term, truth))| CoverageRow {
            term,
            truth,
            rate: runs
                .iter()
                .filter(|r| r.covered.get(i) == Some(&true))
                .count() as f64
                / n,
        })
        .collect();
    Aggregate {
        seeds,
        failures,
        metrics,
        p_frequency,
        coverage,
        partition_recovery_rate: runs.iter().filter(|r| r.partition_recovered).count() as f64 / n,
        runs,
    }
}

impl Aggregate {
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "Seeds: {} ({} failed)",
            self.seeds.len(),
            self.failures.len()
        );
        for (s, e) in &self.failures {
            let _ = writeln!(out, "  seed {s}: {e}");
        }
        let _ = writeln!(out);
        let mut rows = Vec::new();
        for (name, m) in &self.metrics {
            for (k, s) in m {
                rows.push(vec![
                    name.clone(),
                    k.name().to_string(),
                    fmt_sig(s.mean),
                    fmt_sig(s.q05),
                    fmt_sig(s.median),
                    fmt_sig(s.q95),
                ]);
            }
        }
        text_table(
            &mut out,
            &["forecaster", "measure", "mean", "q05", "median", "q95"],
            &rows,
        );
        let _ = writeln!(out);
        let rows: Vec<Vec<String>> = self
            .p_frequency
            .iter()
            .map(|(p, c)| vec![p.to_string(), c.to_string()])
            .collect();
        text_table(&mut out, &["p", "count"], &rows);
        let _ = writeln!(out);
        let rows: Vec<Vec<String>> = self
            .coverage
            .iter()
            .map(|c| vec![c.term.clone(), fmt_sig(c.truth), fmt_sig(c.rate)])
            .collect();
        text_table(&mut out, &["term", "truth", "coverage"], &rows);
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Partition recovery rate: {}",
            fmt_sig(self.partition_recovery_rate)
        );
        out
    }
}
