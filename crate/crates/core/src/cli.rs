//! Command-line surface. Exit codes: 0 success, 1 statistical failure,
//! 2 bad input or usage.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{EventFactor, WeekKey};
use crate::dus::StateMap;
use crate::error::{Error, Result};
use crate::fse::{build_state_design, forecast, ForecastMode, FseFit, StateDesign};
use crate::harness::{
    replicate, run_case, train_states, train_with_states, CaseConfig, ReplicateConfig,
};
use crate::io::{
    bundle_files, fmt_sig, load_bundle, load_calendar, load_config, render_csv, write_all_atomic,
    BundlePaths, Config, DatasetBundle,
};
use crate::synth::{generate, make_company_shaped_spec, Shape};

#[derive(Debug, Parser)]
#[command(
    name = "fse",
    version,
    about = "Event-aware demand forecasting with demand uplift states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct BundleArgs {
    #[arg(long)]
    demand: PathBuf,
    #[arg(long)]
    calendar: PathBuf,
    #[arg(long)]
    factors: PathBuf,
    /// `week,baseline[,adjusted]`
    #[arg(long)]
    forecasts: Option<PathBuf>,
}

impl BundleArgs {
    fn load(&self) -> Result<DatasetBundle> {
        load_bundle(&BundlePaths {
            demand: self.demand.clone(),
            calendar: self.calendar.clone(),
            forecasts: self.forecasts.clone(),
            factors: self.factors.clone(),
        })
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic bundle from a case shape.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        shape: Option<Shape>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Build demand uplift states from the training weeks.
    Dus {
        #[command(flatten)]
        bundle: BundleArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Fit the model on the training weeks with a given state map.
    Fit {
        #[command(flatten)]
        bundle: BundleArgs,
        #[arg(long)]
        state_map: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Forecast from a saved fit over a future calendar.
    Forecast {
        #[arg(long)]
        fit: PathBuf,
        #[arg(long)]
        calendar: PathBuf,
        #[arg(long)]
        horizon: Option<usize>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Full train/holdout evaluation.
    Evaluate {
        #[command(flatten)]
        bundle: BundleArgs,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Monte Carlo over synthetic seeds.
    Replicate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seeds: usize,
        #[arg(long)]
        shape: Option<Shape>,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// A fit plus what is needed to forecast from it later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub fit: FseFit,
    pub state_map: StateMap,
    pub factors: Vec<EventFactor>,
    /// Last training week.
    pub last_week: WeekKey,
    /// Trailing training observations on the original scale.
    pub tail: Vec<f64>,
}

fn config(path: &Option<PathBuf>) -> Result<Config> {
    path.as_deref()
        .map_or_else(|| Ok(Config::default()), load_config)
}

fn json_file(path: PathBuf, value: &impl Serialize) -> Result<(PathBuf, Vec<u8>)> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok((path, bytes))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: e.line() as u64,
        column: e.column().to_string(),
        message: e.to_string(),
    })
}

fn simulate(
    config_path: &Option<PathBuf>,
    shape: Option<Shape>,
    seed: Option<u64>,
    out: &Path,
) -> Result<String> {
    let c = config(config_path)?;
    let shape = shape.or(c.shape).unwrap_or(Shape::A);
    let seed = seed.or(c.seed).unwrap_or(0);
    let spec = make_company_shaped_spec(shape, seed);
    let bundle = generate(&spec)?;
    let mut files = bundle_files(&bundle.to_dataset(), out)?;
    files.push(json_file(out.join("truth.json"), &spec)?);
    write_all_atomic(&files)?;
    Ok(format!(
        "simulated shape {shape:?} seed {seed}: {} weeks, {} events -> {}\n",
        bundle.demand.len(),
        bundle.calendar.event_count(),
        out.display()
    ))
}

fn dus(args: &BundleArgs, config_path: &Option<PathBuf>, out: &Path) -> Result<String> {
    let bundle = args.load()?;
    let case = CaseConfig::from_config(&config(config_path)?);
    let t = case
        .train_length
        .unwrap_or(bundle.demand.len())
        .min(bundle.demand.len());
    let mut log = Vec::new();
    let outcome = train_states(&bundle, t, &case, &mut log)?
        .ok_or_else(|| Error::NoSignificantFactor("no events in the training window".into()))?;
    let map = &outcome.state_map;
    let states = render_csv(
        &["state", "mean_uplift", "samples", "combinations"],
        map.states.iter().map(|s| {
            vec![
                s.label.to_string(),
                s.mean_uplift.to_string(),
                s.sample_count.to_string(),
                s.members
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(" "),
            ]
        }),
    )?;
    let mut audit = log.join("\n");
    audit.push('\n');
    audit.push_str(&outcome.audit.to_string());
    write_all_atomic(&[
        json_file(out.join("state_map.json"), map)?,
        (out.join("states.csv"), states),
        (out.join("audit.txt"), audit.into_bytes()),
    ])?;
    let mut msg = format!("{} state(s) over factors {:?}\n", map.m(), map.factors);
    for s in &map.states {
        msg.push_str(&format!(
            "  state {}: mean uplift {} ({} sample(s))\n",
            s.label,
            fmt_sig(s.mean_uplift),
            s.sample_count
        ));
    }
    Ok(msg)
}

fn fit_command(
    args: &BundleArgs,
    state_map: &Path,
    config_path: &Option<PathBuf>,
    out: &Path,
) -> Result<String> {
    let bundle = args.load()?;
    let map: StateMap = read_json(state_map)?;
    let case = CaseConfig::from_config(&config(config_path)?);
    let n = bundle.demand.len();
    let t = case.train_length.unwrap_or(n);
    if t == 0 || t > n {
        return Err(Error::Config(format!(
            "train_length {t} must lie in 1..={n}"
        )));
    }
    let model = train_with_states(&bundle, t, map.clone(), None, &case, Vec::new())?;
    let keep = model.fit.p + model.fit.differencing_applied;
    let record = FitRecord {
        fit: model.fit.clone(),
        state_map: map,
        factors: bundle.factors.clone(),
        last_week: bundle.demand.week(t - 1),
        tail: bundle.demand.values[t - keep.max(1)..t].to_vec(),
    };
    let f = &model.fit;
    let mut summary = format!(
        "p = {} (AICc-selected), m = {}, differences = {}, residual sigma = {}\n",
        f.p,
        f.m,
        f.differencing_applied,
        fmt_sig(f.residual_sigma)
    );
    let mut names = vec!["alpha0".to_string()];
    names.extend((1..=f.p).map(|i| format!("alpha{i}")));
    names.extend((1..=f.m).map(|j| format!("beta{j}")));
    for (i, n) in names.iter().enumerate() {
        summary.push_str(&format!(
            "  {n:<8} {:>14}  se {:>12}  p {:>12}\n",
            fmt_sig(f.regression.coefficients[i]),
            fmt_sig(f.regression.standard_errors[i]),
            fmt_sig(f.regression.p_values[i])
        ));
    }
    for w in &f.warnings {
        summary.push_str(&format!("  warning: {w}\n"));
    }
    write_all_atomic(&[
        json_file(out.join("fit.json"), &record)?,
        (out.join("fit.txt"), summary.clone().into_bytes()),
    ])?;
    Ok(summary)
}

fn forecast_command(
    fit_path: &Path,
    calendar: &Path,
    horizon: Option<usize>,
    out: &Path,
) -> Result<String> {
    let record: FitRecord = read_json(fit_path)?;
    let cal = load_calendar(calendar, &record.factors)?;
    let first = record.last_week.offset(1);
    if cal.start_week != first {
        return Err(Error::Schema {
            path: calendar.to_path_buf(),
            line: 2,
            column: "week".into(),
            message: format!(
                "future calendar must start at week {first}, found {}",
                cal.start_week
            ),
        });
    }
    let h = horizon.unwrap_or(cal.len());
    if h == 0 || h > cal.len() {
        return Err(Error::Config(format!(
            "horizon {h} must lie in 1..={} (calendar weeks)",
            cal.len()
        )));
    }
    let design = if record.state_map.m() == 0 {
        if cal.events[..h].iter().any(Option::is_some) {
            return Err(Error::InvalidInput(
                "the fit has no states but the calendar has events".into(),
            ));
        }
        StateDesign::empty(h)
    } else {
        build_state_design(&cal, &record.state_map, 0..h)?
    };
    let f = forecast(&record.fit, &record.tail, &design, ForecastMode::Recursive)?;
    let bytes = render_csv(
        &["week", "forecast"],
        f.iter()
            .enumerate()
            .map(|(i, v)| vec![cal.week(i).to_string(), v.to_string()]),
    )?;
    write_all_atomic(&[(out.join("forecast.csv"), bytes)])?;
    Ok(format!("{h} forecast(s) from week {first}\n"))
}

fn evaluate(args: &BundleArgs, config_path: &Option<PathBuf>, out: &Path) -> Result<String> {
    let bundle = args.load()?;
    let case = CaseConfig::from_config(&config(config_path)?);
    let report = run_case(&bundle, &case)?;
    write_all_atomic(&report.files(out)?)?;
    Ok(report.render_text())
}

fn replicate_command(
    config_path: &Option<PathBuf>,
    seeds: usize,
    shape: Option<Shape>,
    out: &Path,
) -> Result<String> {
    let c = config(config_path)?;
    let rc = ReplicateConfig {
        shape: shape.or(c.shape).unwrap_or(Shape::A),
        first_seed: c.seed.unwrap_or(0),
        case: CaseConfig::from_config(&c),
    };
    let agg = replicate(&rc, seeds)?;
    let runs = render_csv(
        &[
            "seed",
            "p",
            "m",
            "partition_recovered",
            "fse_mae",
            "ses_mae",
        ],
        agg.runs.iter().map(|r| {
            let mae = |name: &str| {
                r.errors
                    .get(name)
                    .and_then(|m| m.get(&crate::metrics::Metric::Mae))
                    .map(|v| v.to_string())
                    .unwrap_or_default()
            };
            vec![
                r.seed.to_string(),
                r.p.to_string(),
                r.m.to_string(),
                r.partition_recovered.to_string(),
                mae("fse"),
                mae("ses"),
            ]
        }),
    )?;
    let text = agg.render_text();
    write_all_atomic(&[
        json_file(out.join("aggregate.json"), &agg)?,
        (out.join("aggregate.txt"), text.clone().into_bytes()),
        (out.join("runs.csv"), runs),
    ])?;
    Ok(text)
}

fn dispatch(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Simulate {
            config,
            shape,
            seed,
            out_dir,
        } => simulate(&config, shape, seed, &out_dir),
        Command::Dus {
            bundle,
            config,
            out_dir,
        } => dus(&bundle, &config, &out_dir),
        Command::Fit {
            bundle,
            state_map,
            config,
            out_dir,
        } => fit_command(&bundle, &state_map, &config, &out_dir),
        Command::Forecast {
            fit,
            calendar,
            horizon,
            out_dir,
        } => forecast_command(&fit, &calendar, horizon, &out_dir),
        Command::Evaluate {
            bundle,
            config,
            out_dir,
        } => evaluate(&bundle, &config, &out_dir),
        Command::Replicate {
            config,
            seeds,
            shape,
            out_dir,
        } => replicate_command(&config, seeds, shape, &out_dir),
    }
}

/// Parse `argv` (program name first), run the subcommand and return the
/// exit code. Results go to stdout, errors to stderr.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(msg) => {
            print!("{msg}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_input_error() {
                2
            } else {
                1
            }
        }
    }
}
