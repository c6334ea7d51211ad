//! Seeded synthetic demand from the event-aware autoregression.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64`. Noise uses stream 0 and calendar construction stream 1.
//! Each Gaussian draw consumes two 64-bit outputs `a`, `b` and applies
//! Box-Muller on `u1 = ((a >> 11) + 1) * 2^-53` and `u2 = (b >> 11) * 2^-53`,
//! keeping only the cosine branch: `z = sqrt(-2 ln u1) * cos(2 pi u2)`.
//! Noise is drawn for every week whether or not an event occurs, so removing
//! events leaves the noise path unchanged.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::baselines::event_cleansed_baseline;
use crate::data::{DemandSeries, EventCalendar, EventCombination, EventFactor, WeekKey};
use crate::dus::{StateMap, UpliftState};
use crate::error::{Error, Result};
use crate::fse::{build_state_design, companion_moduli, StateDesign};
use crate::io::DatasetBundle;

/// Steps simulated and discarded before the first reported week.
pub const BURN_IN: usize = 200;

/// Deterministic random source shared by the generator and the tests.
#[derive(Debug, Clone)]
pub struct SynthRng(ChaCha8Rng);

impl SynthRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self(rng)
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by the Box-Muller cosine branch.
    pub fn normal(&mut self) -> f64 {
        let u1 = ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Uniform integer in `0..n` (multiply-shift; `n` must be positive).
    pub fn below(&mut self, n: usize) -> usize {
        ((self.0.next_u64() as u128 * n as u128) >> 64) as usize
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, v: &mut [T]) {
        for i in (1..v.len()).rev() {
            let j = self.below(i + 1);
            v.swap(i, j);
        }
    }
}

/// Parameters of the data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub n_weeks: usize,
    pub p: usize,
    pub alpha0: f64,
    pub alphas: Vec<f64>,
    /// One uplift per state of `state_map`, in label order.
    pub betas: Vec<f64>,
    /// Standard deviation of the Gaussian noise.
    pub sigma: f64,
    /// Zero-based week and event combination.
    pub calendar_pattern: Vec<(usize, EventCombination)>,
    pub state_map: StateMap,
    pub factors: Vec<EventFactor>,
    pub seed: u64,
    pub start_week: WeekKey,
}

impl GeneratorSpec {
    /// Check the invariants, returning lag-polynomial root moduli on failure.
    pub fn validate(&self) -> Result<()> {
        if self.alphas.len() != self.p {
            return Err(Error::Dimension(format!(
                "p = {} but {} AR coefficients",
                self.p,
                self.alphas.len()
            )));
        }
        if self.betas.len() != self.state_map.m() {
            return Err(Error::Dimension(format!(
                "{} betas for {} states",
                self.betas.len(),
                self.state_map.m()
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::InvalidInput(format!(
                "sigma must be non-negative, got {}",
                self.sigma
            )));
        }
        if self.n_weeks == 0 {
            return Err(Error::InvalidInput("n_weeks must be positive".into()));
        }
        let companion = companion_moduli(&self.alphas);
        if companion.iter().any(|&r| r >= 1.0) {
            // roots of 1 - sum a_i z^i are the reciprocals of the companion roots
            return Err(Error::NonstationarySpec {
                moduli: companion.iter().map(|r| 1.0 / r).collect(),
            });
        }
        let mut seen = vec![false; self.n_weeks];
        for (w, c) in &self.calendar_pattern {
            if *w >= self.n_weeks {
                return Err(Error::InvalidInput(format!(
                    "event week {w} beyond n_weeks {}",
                    self.n_weeks
                )));
            }
            if std::mem::replace(&mut seen[*w], true) {
                return Err(Error::InvalidInput(format!("two events in week {w}")));
            }
            if self.state_map.state_of_event(c).is_none() {
                return Err(Error::InvalidInput(format!(
                    "week {w}: combination {c} has no state"
                )));
            }
        }
        Ok(())
    }

    /// Stationary mean of the no-event process.
    pub fn process_mean(&self) -> f64 {
        self.alpha0 / (1.0 - self.alphas.iter().sum::<f64>())
    }

    /// The calendar implied by the pattern.
    pub fn calendar(&self) -> Result<EventCalendar> {
        let mut events = vec![None; self.n_weeks];
        for (w, c) in &self.calendar_pattern {
            events[*w] = Some(c.clone());
        }
        EventCalendar::new(self.start_week, self.factors.clone(), events)
    }

    /// The same process with every event removed.
    pub fn without_events(&self) -> GeneratorSpec {
        GeneratorSpec {
            calendar_pattern: Vec::new(),
            ..self.clone()
        }
    }
}

/// Generated data together with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticBundle {
    pub demand: DemandSeries,
    pub calendar: EventCalendar,
    pub truth: GeneratorSpec,
    /// Event-cleansed SES forecasts of the generated series.
    pub baseline: Vec<Option<f64>>,
}

impl SyntheticBundle {
    /// State indicators under the true state map.
    pub fn truth_design(&self) -> Result<StateDesign> {
        build_state_design(
            &self.calendar,
            &self.truth.state_map,
            0..self.calendar.len(),
        )
    }

    pub fn to_dataset(&self) -> DatasetBundle {
        DatasetBundle {
            demand: self.demand.clone(),
            calendar: self.calendar.clone(),
            baseline_forecasts: Some(self.baseline.clone()),
            adjusted_forecasts: None,
            factors: self.truth.factors.clone(),
        }
    }
}

/// Simulate the process: burn-in from the stationary mean, then `n_weeks`
/// reported weeks with event uplifts added on event weeks.
pub fn generate(spec: &GeneratorSpec) -> Result<SyntheticBundle> {
    spec.validate()?;
    let calendar = spec.calendar()?;
    let design = build_state_design(&calendar, &spec.state_map, 0..spec.n_weeks)?;
    let p = spec.p;
    let mut rng = SynthRng::new(spec.seed, 0);
    let mu = spec.process_mean();
    let mut path = vec![mu; p];
    path.reserve(BURN_IN + spec.n_weeks);
    for t in 0..BURN_IN + spec.n_weeks {
        let mut x = spec.alpha0;
        for (i, a) in spec.alphas.iter().enumerate() {
            x += a * path[path.len() - 1 - i];
        }
        if t >= BURN_IN {
            if let Some(j) = design.active(t - BURN_IN) {
                x += spec.betas[j - 1];
            }
        }
        x += spec.sigma * rng.normal();
        path.push(x);
    }
    let values = path.split_off(p + BURN_IN);
    let baseline = event_cleansed_baseline(&values, &calendar.event_mask())?
        .into_iter()
        .map(Some)
        .collect();
    Ok(SyntheticBundle {
        demand: DemandSeries::new(spec.start_week, values)?,
        calendar,
        truth: spec.clone(),
        baseline,
    })
}

/// Case-study shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Shape {
    /// 100 weeks, 16 promotions (8 major, 8 minor), five states.
    A,
    /// 120 weeks, 60 promotions (28 single buy, 32 multiple buy), six states.
    B,
}

impl std::str::FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "A" | "a" => Ok(Shape::A),
            "B" | "b" => Ok(Shape::B),
            other => Err(Error::Config(format!(
                "unknown shape {other:?}, expected A or B"
            ))),
        }
    }
}

fn state(label: usize, members: Vec<EventCombination>, mean: f64) -> UpliftState {
    UpliftState {
        label,
        members,
        mean_uplift: mean,
        sample_count: 0,
    }
}

fn combo(f1: &str, l1: &str, f2: &str, l2: &str) -> EventCombination {
    EventCombination::from_pairs([(f1, l1), (f2, l2)])
}

/// A spec mirroring one of the two case studies; `seed` drives both the
/// calendar layout and the noise.
pub fn make_company_shaped_spec(shape: Shape, seed: u64) -> GeneratorSpec {
    match shape {
        Shape::A => shape_a(seed),
        Shape::B => shape_b(seed),
    }
}

const PT: &str = "promotion_type";
const DT: &str = "display_type";
const AT: &str = "advertisement_type";

fn shape_a(seed: u64) -> GeneratorSpec {
    let n_weeks = 100;
    let holdout_start = 80;
    let alphas = vec![0.02, 0.01];
    let mean = 450.0;
    // (combination, state label, count); labels follow descending uplift
    let cells = [
        (combo(PT, "major", DT, "entrance"), 1, 4),
        (combo(PT, "major", DT, "fge"), 2, 4),
        (combo(PT, "minor", DT, "fge"), 3, 2),
        (combo(PT, "minor", DT, "fixture"), 4, 3),
        (combo(PT, "minor", DT, "other_gondola"), 5, 3),
    ];
    let betas = vec![19816.0, 14833.0, 5091.0, 4121.0, 3466.0];
    let mut rng = SynthRng::new(seed, 1);

    // 16 roughly evenly spaced weeks with +-1 jitter; the last three fall in the holdout
    let weeks: Vec<usize> = (0..16)
        .map(|i| {
            let centre = (3.0 + 6.25 * i as f64).round() as i64;
            (centre + rng.below(3) as i64 - 1) as usize
        })
        .collect();
    let mut labels: Vec<usize> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| std::iter::repeat_n(c, cell.2))
        .collect();
    // minor promotions all fall in training and every combination gets two
    // training occurrences, so each pair can be tested
    loop {
        rng.shuffle(&mut labels);
        let mut counts = [0usize; 5];
        let mut minor_in_holdout = false;
        for (w, &c) in weeks.iter().zip(&labels) {
            if *w < holdout_start {
                counts[c] += 1;
            } else if c >= 2 {
                minor_in_holdout = true;
            }
        }
        if !minor_in_holdout && counts.iter().all(|&k| k >= 2) {
            break;
        }
    }
    let calendar_pattern = weeks
        .iter()
        .zip(&labels)
        .map(|(w, &c)| (*w, cells[c].0.clone()))
        .collect();
    let state_map = StateMap {
        factors: vec![DT.to_string(), PT.to_string()],
        states: cells
            .iter()
            .map(|(c, label, _)| state(*label, vec![c.clone()], betas[label - 1]))
            .collect(),
    };
    GeneratorSpec {
        n_weeks,
        p: 2,
        alpha0: mean * (1.0 - alphas.iter().sum::<f64>()),
        alphas,
        betas,
        sigma: 50.0,
        calendar_pattern,
        state_map,
        factors: vec![
            EventFactor {
                name: PT.into(),
                levels: vec!["major".into(), "minor".into()],
            },
            EventFactor {
                name: DT.into(),
                levels: vec![
                    "entrance".into(),
                    "fge".into(),
                    "other_gondola".into(),
                    "fixture".into(),
                ],
            },
        ],
        seed,
        start_week: WeekKey::Index(1),
    }
}

fn shape_b(seed: u64) -> GeneratorSpec {
    let n_weeks = 120;
    let alphas = vec![0.2, 0.1];
    let mean = 7.0;
    let cells = [
        (combo(PT, "single_buy", AT, "catalogue"), 1, 10),
        (combo(PT, "single_buy", AT, "minor_catalogue"), 2, 9),
        (combo(PT, "multiple_buy", AT, "catalogue"), 3, 11),
        (combo(PT, "single_buy", AT, "in_store"), 4, 9),
        (combo(PT, "multiple_buy", AT, "in_store"), 5, 10),
        (combo(PT, "multiple_buy", AT, "minor_catalogue"), 6, 11),
    ];
    let betas = vec![311.0, 213.3, 160.48, 16.0, 15.8, 7.3];
    let mut rng = SynthRng::new(seed, 1);
    let mut weeks: Vec<usize> = (0..n_weeks).collect();
    rng.shuffle(&mut weeks);
    let mut weeks: Vec<usize> = weeks.into_iter().take(60).collect();
    weeks.sort_unstable();
    let mut labels: Vec<usize> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| std::iter::repeat_n(c, cell.2))
        .collect();
    rng.shuffle(&mut labels);
    let calendar_pattern = weeks
        .iter()
        .zip(&labels)
        .map(|(w, &c)| (*w, cells[c].0.clone()))
        .collect();
    let state_map = StateMap {
        factors: vec![AT.to_string(), PT.to_string()],
        states: cells
            .iter()
            .map(|(c, label, _)| state(*label, vec![c.clone()], betas[label - 1]))
            .collect(),
    };
    GeneratorSpec {
        n_weeks,
        p: 2,
        alpha0: mean * (1.0 - alphas.iter().sum::<f64>()),
        alphas,
        betas,
        sigma: 5.0,
        calendar_pattern,
        state_map,
        factors: vec![
            EventFactor {
                name: PT.into(),
                levels: vec!["single_buy".into(), "multiple_buy".into()],
            },
            EventFactor {
                name: AT.into(),
                levels: vec![
                    "catalogue".into(),
                    "in_store".into(),
                    "minor_catalogue".into(),
                ],
            },
        ],
        seed,
        start_week: WeekKey::Index(1),
    }
}
