//! CSV ingestion and export, the `key = value` config format and atomic
//! file writes.
//!
//! Schemas (header row required, UTF-8, comma separated):
//!
//! ```text
//! demand.csv     week,demand
//! calendar.csv   week,<factor_1>,...,<factor_F>   (all cells empty = no event)
//! forecasts.csv  week,baseline[,adjusted]          (empty cell = missing)
//! factors.csv    factor,level
//! ```
//!
//! `week` is an integer index or an ISO-8601 date, one scheme per file.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, EventCalendar, EventCombination, EventFactor, WeekKey};
use crate::error::{Error, Result};
use crate::metrics::{MsaeVariant, ZeroPolicy};
use crate::synth::Shape;

/// Everything a case needs, aligned on one weekly index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetBundle {
    pub demand: DemandSeries,
    pub calendar: EventCalendar,
    pub baseline_forecasts: Option<Vec<Option<f64>>>,
    pub adjusted_forecasts: Option<Vec<Option<f64>>>,
    pub factors: Vec<EventFactor>,
}

/// Input file locations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundlePaths {
    pub demand: PathBuf,
    pub calendar: PathBuf,
    pub forecasts: Option<PathBuf>,
    pub factors: PathBuf,
}

impl BundlePaths {
    /// The standard file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        let forecasts = dir.join("forecasts.csv");
        Self {
            demand: dir.join("demand.csv"),
            calendar: dir.join("calendar.csv"),
            forecasts: forecasts.exists().then_some(forecasts),
            factors: dir.join("factors.csv"),
        }
    }
}

fn schema(path: &Path, line: u64, column: &str, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        column: column.to_string(),
        message: message.into(),
    }
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    /// (line number, cells)
    rows: Vec<(u64, Vec<String>)>,
}

fn read_table(path: &Path) -> Result<Table> {
    let text =
        fs::read_to_string(path).map_err(|e| schema(path, 0, "", format!("cannot read: {e}")))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| schema(path, 1, "", e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.iter().all(String::is_empty) {
        return Err(schema(path, 1, "", "missing header row"));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            schema(path, line, "", e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        rows.push((line, rec.iter().map(str::to_string).collect()));
    }
    Ok(Table {
        path: path.to_path_buf(),
        header,
        rows,
    })
}

fn expect_header(t: &Table, expected: &[&str]) -> Result<()> {
    for (i, name) in expected.iter().enumerate() {
        match t.header.get(i) {
            Some(h) if h == name => {}
            Some(h) => return Err(schema(&t.path, 1, h, format!("expected column {name:?}"))),
            None => return Err(schema(&t.path, 1, name, "missing column")),
        }
    }
    Ok(())
}

/// Parse the week column, enforcing one scheme and contiguous weeks.
fn parse_weeks(t: &Table) -> Result<Vec<WeekKey>> {
    let mut weeks = Vec::with_capacity(t.rows.len());
    for (line, cells) in &t.rows {
        let w = WeekKey::parse(&cells[0]).ok_or_else(|| {
            schema(
                &t.path,
                *line,
                "week",
                format!("cannot parse week {:?}", cells[0]),
            )
        })?;
        if let Some(first) = weeks.first() {
            let first: &WeekKey = first;
            if first.is_date() != w.is_date() {
                return Err(schema(
                    &t.path,
                    *line,
                    "week",
                    "mixes integer and date weeks",
                ));
            }
        }
        weeks.push(w);
    }
    let Some(&start) = weeks.first() else {
        return Err(schema(&t.path, 2, "week", "no data rows"));
    };
    let mut problems = Vec::new();
    for (i, pair) in weeks.windows(2).enumerate() {
        match pair[0].weeks_until(pair[1]) {
            Some(1) => {}
            Some(k) if k > 1 => {
                let missing: Vec<String> = (1..k).map(|j| pair[0].offset(j).to_string()).collect();
                problems.push(format!(
                    "gap before line {}: missing {}",
                    t.rows[i + 1].0,
                    missing.join(", ")
                ));
            }
            _ => problems.push(format!(
                "line {}: week {} does not follow {}",
                t.rows[i + 1].0,
                pair[1],
                pair[0]
            )),
        }
    }
    if !problems.is_empty() {
        return Err(schema(
            &t.path,
            t.rows[0].0,
            "week",
            format!("weeks are not contiguous: {}", problems.join("; ")),
        ));
    }
    debug_assert_eq!(start.offset(weeks.len() as i64 - 1), weeks[weeks.len() - 1]);
    Ok(weeks)
}

fn parse_number(t: &Table, line: u64, column: &str, cell: &str) -> Result<f64> {
    let v: f64 = cell
        .parse()
        .map_err(|_| schema(&t.path, line, column, format!("not a number: {cell:?}")))?;
    if !v.is_finite() {
        return Err(schema(
            &t.path,
            line,
            column,
            format!("not finite: {cell:?}"),
        ));
    }
    Ok(v)
}

fn check_width(t: &Table) -> Result<()> {
    for (line, cells) in &t.rows {
        if cells.len() != t.header.len() {
            return Err(schema(
                &t.path,
                *line,
                "",
                format!("{} fields, header has {}", cells.len(), t.header.len()),
            ));
        }
    }
    Ok(())
}

pub fn load_factors(path: &Path) -> Result<Vec<EventFactor>> {
    let t = read_table(path)?;
    expect_header(&t, &["factor", "level"])?;
    check_width(&t)?;
    let mut factors: Vec<EventFactor> = Vec::new();
    for (line, cells) in &t.rows {
        let (name, level) = (&cells[0], &cells[1]);
        if name.is_empty() {
            return Err(schema(path, *line, "factor", "empty factor name"));
        }
        if level.is_empty() {
            return Err(schema(path, *line, "level", "empty level"));
        }
        match factors.iter_mut().find(|f| &f.name == name) {
            Some(f) if f.has_level(level) => {
                return Err(schema(
                    path,
                    *line,
                    "level",
                    format!("level {level:?} of {name} declared twice"),
                ))
            }
            Some(f) => f.levels.push(level.clone()),
            None => factors.push(EventFactor {
                name: name.clone(),
                levels: vec![level.clone()],
            }),
        }
    }
    Ok(factors)
}

pub fn load_demand(path: &Path) -> Result<DemandSeries> {
    let t = read_table(path)?;
    expect_header(&t, &["week", "demand"])?;
    check_width(&t)?;
    let weeks = parse_weeks(&t)?;
    let values = t
        .rows
        .iter()
        .map(|(line, cells)| parse_number(&t, *line, "demand", &cells[1]))
        .collect::<Result<Vec<f64>>>()?;
    DemandSeries::new(weeks[0], values)
}

/// Calendar over declared factors; the header may list them in any order.
pub fn load_calendar(path: &Path, factors: &[EventFactor]) -> Result<EventCalendar> {
    let t = read_table(path)?;
    expect_header(&t, &["week"])?;
    check_width(&t)?;
    let columns = &t.header[1..];
    for (i, c) in columns.iter().enumerate() {
        if !factors.iter().any(|f| &f.name == c) {
            return Err(schema(path, 1, c, format!("factor {c:?} is not declared")));
        }
        if columns[..i].contains(c) {
            return Err(schema(path, 1, c, "duplicate column"));
        }
    }
    if let Some(f) = factors.iter().find(|f| !columns.contains(&f.name)) {
        return Err(schema(
            path,
            1,
            &f.name,
            format!("declared factor {:?} has no column", f.name),
        ));
    }
    let weeks = parse_weeks(&t)?;
    let mut events = Vec::with_capacity(t.rows.len());
    for (line, cells) in &t.rows {
        let filled = cells[1..].iter().filter(|c| !c.is_empty()).count();
        if filled == 0 {
            events.push(None);
            continue;
        }
        if filled != columns.len() {
            let col = columns
                .iter()
                .zip(&cells[1..])
                .find(|(_, v)| v.is_empty())
                .map(|(c, _)| c.as_str())
                .unwrap_or("");
            return Err(schema(
                path,
                *line,
                col,
                "partial event: fill every factor or none",
            ));
        }
        let mut combo = BTreeMap::new();
        for (c, v) in columns.iter().zip(&cells[1..]) {
            let f = factors
                .iter()
                .find(|f| &f.name == c)
                .expect("checked above");
            if !f.has_level(v) {
                return Err(schema(
                    path,
                    *line,
                    c,
                    format!("level {v:?} is not declared for factor {c}"),
                ));
            }
            combo.insert(c.clone(), v.clone());
        }
        events.push(Some(EventCombination(combo)));
    }
    EventCalendar::new(weeks[0], factors.to_vec(), events)
}

type ForecastColumns = (WeekKey, Vec<Option<f64>>, Option<Vec<Option<f64>>>);

fn load_forecasts(path: &Path) -> Result<ForecastColumns> {
    let t = read_table(path)?;
    expect_header(&t, &["week", "baseline"])?;
    if t.header.len() > 3 || (t.header.len() == 3 && t.header[2] != "adjusted") {
        return Err(schema(
            path,
            1,
            &t.header[t.header.len() - 1],
            "expected week,baseline[,adjusted]",
        ));
    }
    check_width(&t)?;
    let weeks = parse_weeks(&t)?;
    let cell = |line: u64, col: &str, s: &str| -> Result<Option<f64>> {
        if s.is_empty() {
            Ok(None)
        } else {
            parse_number(&t, line, col, s).map(Some)
        }
    };
    let baseline = t
        .rows
        .iter()
        .map(|(l, c)| cell(*l, "baseline", &c[1]))
        .collect::<Result<Vec<_>>>()?;
    let adjusted = if t.header.len() == 3 {
        Some(
            t.rows
                .iter()
                .map(|(l, c)| cell(*l, "adjusted", &c[2]))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok((weeks[0], baseline, adjusted))
}

fn check_aligned(path: &Path, demand: &DemandSeries, start: WeekKey, len: usize) -> Result<()> {
    if start != demand.start_week || len != demand.len() {
        let end = |s: WeekKey, n: usize| s.offset(n as i64 - 1);
        return Err(schema(
            path,
            2,
            "week",
            format!(
                "covers weeks {}..={} but demand covers {}..={}",
                start,
                end(start, len),
                demand.start_week,
                end(demand.start_week, demand.len())
            ),
        ));
    }
    Ok(())
}

/// Read and cross-validate all bundle files.
pub fn load_bundle(paths: &BundlePaths) -> Result<DatasetBundle> {
    let factors = load_factors(&paths.factors)?;
    let demand = load_demand(&paths.demand)?;
    let calendar = load_calendar(&paths.calendar, &factors)?;
    check_aligned(
        &paths.calendar,
        &demand,
        calendar.start_week,
        calendar.len(),
    )?;
    let (baseline_forecasts, adjusted_forecasts) = match &paths.forecasts {
        Some(p) => {
            let (start, baseline, adjusted) = load_forecasts(p)?;
            check_aligned(p, &demand, start, baseline.len())?;
            (Some(baseline), adjusted)
        }
        None => (None, None),
    };
    Ok(DatasetBundle {
        demand,
        calendar,
        baseline_forecasts,
        adjusted_forecasts,
        factors,
    })
}

/// Write `bytes` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Several files, all rendered before any is written.
pub fn write_all_atomic(files: &[(PathBuf, Vec<u8>)]) -> Result<()> {
    for (path, bytes) in files {
        write_atomic(path, bytes)?;
    }
    Ok(())
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

/// Rendered CSV tables for a table-like writer.
pub fn render_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    csv_bytes(header, rows)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// The bundle's files, named as `BundlePaths::in_dir` expects.
pub fn bundle_files(bundle: &DatasetBundle, dir: &Path) -> Result<Vec<(PathBuf, Vec<u8>)>> {
    let d = &bundle.demand;
    let mut files = vec![
        (
            dir.join("factors.csv"),
            csv_bytes(
                &["factor", "level"],
                bundle.factors.iter().flat_map(|f| {
                    f.levels
                        .iter()
                        .map(move |l| vec![f.name.clone(), l.clone()])
                }),
            )?,
        ),
        (
            dir.join("demand.csv"),
            csv_bytes(
                &["week", "demand"],
                d.values
                    .iter()
                    .enumerate()
                    .map(|(i, v)| vec![d.week(i).to_string(), v.to_string()]),
            )?,
        ),
    ];
    let cal = &bundle.calendar;
    let mut header = vec!["week"];
    header.extend(cal.factors.iter().map(|f| f.name.as_str()));
    files.push((
        dir.join("calendar.csv"),
        csv_bytes(
            &header,
            cal.events.iter().enumerate().map(|(i, ev)| {
                let mut row = vec![cal.week(i).to_string()];
                row.extend(cal.factors.iter().map(|f| {
                    ev.as_ref()
                        .and_then(|c| c.level(&f.name))
                        .unwrap_or("")
                        .to_string()
                }));
                row
            }),
        )?,
    ));
    if let Some(base) = &bundle.baseline_forecasts {
        let adj = bundle.adjusted_forecasts.as_ref();
        let header: &[&str] = if adj.is_some() {
            &["week", "baseline", "adjusted"]
        } else {
            &["week", "baseline"]
        };
        files.push((
            dir.join("forecasts.csv"),
            csv_bytes(
                header,
                base.iter().enumerate().map(|(i, b)| {
                    let mut row = vec![d.week(i).to_string(), opt(*b)];
                    if let Some(a) = adj {
                        row.push(opt(a[i]));
                    }
                    row
                }),
            )?,
        ));
    }
    Ok(files)
}

/// Write the bundle in the input schemas with full-precision numbers.
pub fn save_bundle(bundle: &DatasetBundle, dir: &Path) -> Result<()> {
    if bundle.adjusted_forecasts.is_some() && bundle.baseline_forecasts.is_none() {
        return Err(Error::InvalidInput(
            "adjusted forecasts need a baseline column".into(),
        ));
    }
    write_all_atomic(&bundle_files(bundle, dir)?)
}

/// Six significant digits for human-readable tables.
pub fn fmt_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let mag = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&mag) {
        return format!("{x:.5e}");
    }
    let decimals = (5 - mag).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Forecast mode named in configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeChoice {
    #[default]
    Recursive,
    Rolling,
}

/// Settings read from a `key = value` file. Unset keys keep their defaults.
///
/// Keys: `train_length`, `holdout`, `p_max`, `alpha`, `fallback_rel_tol`,
/// `msae_variant` (`ratio_of_sums` | `paper_literal`), `mape_zero_policy`
/// (`exclude` | `error`), `forecast_mode` (`recursive` | `rolling`),
/// `max_diff`, `seed`, `shape` (`A` | `B`). `#` starts a comment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Config {
    pub train_length: Option<usize>,
    pub holdout: Option<usize>,
    pub p_max: Option<usize>,
    pub alpha: Option<f64>,
    pub fallback_rel_tol: Option<f64>,
    pub msae_variant: Option<MsaeVariant>,
    pub mape_zero_policy: Option<ZeroPolicy>,
    pub forecast_mode: Option<ModeChoice>,
    pub max_diff: Option<usize>,
    pub seed: Option<u64>,
    pub shape: Option<Shape>,
}

fn parse_value<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::Config(format!("line {line}: invalid value {v:?} for {key}")))
}

fn parse_prob(line: usize, key: &str, v: &str) -> Result<f64> {
    let x: f64 = parse_value(line, key, v)?;
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::Config(format!(
            "line {line}: {key} must lie in (0, 1), got {v}"
        )));
    }
    Ok(x)
}

pub fn parse_config(text: &str) -> Result<Config> {
    let mut c = Config::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {line}: expected key = value")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "train_length" => c.train_length = Some(parse_value(line, key, value)?),
            "holdout" => c.holdout = Some(parse_value(line, key, value)?),
            "p_max" => c.p_max = Some(parse_value(line, key, value)?),
            "alpha" => c.alpha = Some(parse_prob(line, key, value)?),
            "fallback_rel_tol" => {
                let v: f64 = parse_value(line, key, value)?;
                if !(v >= 0.0) {
                    return Err(Error::Config(format!(
                        "line {line}: {key} must be non-negative"
                    )));
                }
                c.fallback_rel_tol = Some(v);
            }
            "msae_variant" => {
                c.msae_variant = Some(match value {
                    "ratio_of_sums" => MsaeVariant::RatioOfSums,
                    "paper_literal" => MsaeVariant::PaperLiteral,
                    _ => {
                        return Err(Error::Config(format!(
                            "line {line}: unknown msae_variant {value:?}"
                        )))
                    }
                })
            }
            "mape_zero_policy" => {
                c.mape_zero_policy = Some(match value {
                    "exclude" => ZeroPolicy::Exclude,
                    "error" => ZeroPolicy::Error,
                    _ => {
                        return Err(Error::Config(format!(
                            "line {line}: unknown mape_zero_policy {value:?}"
                        )))
                    }
                })
            }
            "forecast_mode" => {
                c.forecast_mode = Some(match value {
                    "recursive" => ModeChoice::Recursive,
                    "rolling" => ModeChoice::Rolling,
                    _ => {
                        return Err(Error::Config(format!(
                            "line {line}: unknown forecast_mode {value:?}"
                        )))
                    }
                })
            }
            "max_diff" => c.max_diff = Some(parse_value(line, key, value)?),
            "seed" => c.seed = Some(parse_value(line, key, value)?),
            "shape" => {
                c.shape = Some(value.parse().map_err(|_| {
                    Error::Config(format!(
                        "line {line}: unknown shape {value:?}, expected A or B"
                    ))
                })?)
            }
            _ => return Err(Error::Config(format!("line {line}: unknown key {key:?}"))),
        }
    }
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text)
}
