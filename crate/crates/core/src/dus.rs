//! Demand uplift states: turn event-week uplifts into a small set of states
//! with distinguishable mean uplift.
//!
//! The procedure runs in five steps:
//!
//! 0. uplift per event week = actual demand minus baseline forecast;
//! 1. ANOVA screen of the candidate factors, keep the significant ones;
//! 2. enumerate the observed combinations of the significant factors;
//! 3. average uplift per combination;
//! 4. merge combinations whose uplifts are not distinguishable.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{DemandSeries, EventCalendar, EventCombination, EventFactor};
use crate::error::{Error, Result};
use crate::stats::{
    anova_factor_screen, mean, sample_variance, welch_t_test, FactorColumn, FactorEffect,
};

/// Uplift observed in one event week.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftSample {
    /// Position of the week within the calendar.
    pub week_index: usize,
    pub combination: EventCombination,
    pub uplift: f64,
}

/// Actual minus baseline on every event week.
pub fn compute_uplifts(
    demand: &DemandSeries,
    baseline: &[Option<f64>],
    calendar: &EventCalendar,
) -> Result<Vec<UpliftSample>> {
    if demand.start_week != calendar.start_week
        || demand.len() != calendar.len()
        || baseline.len() != demand.len()
    {
        return Err(Error::Dimension(format!(
            "demand ({} weeks from {}), baseline ({}) and calendar ({} weeks from {}) must cover the same weeks",
            demand.len(),
            demand.start_week,
            baseline.len(),
            calendar.len(),
            calendar.start_week
        )));
    }
    let mut out = Vec::new();
    for (i, ev) in calendar.events.iter().enumerate() {
        let Some(combination) = ev else { continue };
        let base = baseline[i].ok_or_else(|| {
            Error::InvalidInput(format!(
                "missing baseline forecast on event week {}",
                calendar.week(i)
            ))
        })?;
        out.push(UpliftSample {
            week_index: i,
            combination: combination.clone(),
            uplift: demand.values[i] - base,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignificantFactor {
    pub factor: EventFactor,
    pub effect: FactorEffect,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Screening {
    pub significant: Vec<SignificantFactor>,
    /// Every tested factor, significant or not.
    pub effects: Vec<FactorEffect>,
    pub warnings: Vec<String>,
}

impl Screening {
    pub fn factor_names(&self) -> Vec<String> {
        self.significant
            .iter()
            .map(|s| s.factor.name.clone())
            .collect()
    }
}

/// Keep the factors whose main effect on uplift is significant at `alpha`.
pub fn screen_significant_factors(
    samples: &[UpliftSample],
    candidate_factors: &[EventFactor],
    alpha: f64,
) -> Result<Screening> {
    if samples.len() < 2 {
        return Err(Error::NoSignificantFactor(format!(
            "{} uplift sample(s) is too few to screen factors",
            samples.len()
        )));
    }
    let responses: Vec<f64> = samples.iter().map(|s| s.uplift).collect();
    let mut columns = Vec::with_capacity(candidate_factors.len());
    for f in candidate_factors {
        let levels = samples
            .iter()
            .map(|s| {
                s.combination
                    .level(&f.name)
                    .map(str::to_owned)
                    .ok_or_else(|| {
                        Error::InvalidInput(format!(
                            "week index {}: no level for factor {}",
                            s.week_index, f.name
                        ))
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        columns.push(FactorColumn {
            name: f.name.clone(),
            levels,
        });
    }
    let screen = match anova_factor_screen(&responses, &columns) {
        Ok(s) => s,
        Err(Error::InsufficientData(msg)) => {
            return Err(Error::NoSignificantFactor(format!(
                "no factor testable: {msg}"
            )))
        }
        Err(e) => return Err(e),
    };
    if screen.effects.is_empty() {
        return Err(Error::NoSignificantFactor("no factor testable".into()));
    }
    let significant: Vec<SignificantFactor> = screen
        .effects
        .iter()
        .filter(|e| e.p_value < alpha)
        .map(|e| SignificantFactor {
            factor: candidate_factors
                .iter()
                .find(|f| f.name == e.name)
                .cloned()
                .expect("effect names come from the candidates"),
            effect: e.clone(),
        })
        .collect();
    if significant.is_empty() {
        return Err(Error::NoSignificantFactor(format!(
            "no factor significant at alpha = {alpha}"
        )));
    }
    Ok(Screening {
        significant,
        effects: screen.effects,
        warnings: screen.warnings,
    })
}

/// Observed combinations of the significant factors in label order 1..k.
pub fn enumerate_combinations(
    significant_factors: &[EventFactor],
    samples: &[UpliftSample],
) -> Result<Vec<EventCombination>> {
    if significant_factors.is_empty() {
        return Err(Error::InvalidInput(
            "no significant factor to combine".into(),
        ));
    }
    let names: Vec<String> = significant_factors.iter().map(|f| f.name.clone()).collect();
    let observed: BTreeSet<EventCombination> = samples
        .iter()
        .map(|s| s.combination.project(&names))
        .collect();
    Ok(observed.into_iter().collect())
}

/// Uplift summary for one combination.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationStats {
    pub combination: EventCombination,
    pub mean: f64,
    pub count: usize,
    /// Unavailable for single-sample combinations.
    pub variance: Option<f64>,
    pub uplifts: Vec<f64>,
}

/// Mean uplift per combination, in the order of `combinations`.
pub fn average_uplift_per_combination(
    samples: &[UpliftSample],
    combinations: &[EventCombination],
) -> Result<Vec<CombinationStats>> {
    let names: Vec<String> = combinations
        .first()
        .map(|c| c.0.keys().cloned().collect())
        .unwrap_or_default();
    let mut groups: BTreeMap<&EventCombination, Vec<f64>> =
        combinations.iter().map(|c| (c, Vec::new())).collect();
    for s in samples {
        let key = s.combination.project(&names);
        if let Some(g) = groups.get_mut(&key) {
            g.push(s.uplift);
        }
    }
    combinations
        .iter()
        .map(|c| {
            let uplifts = groups.remove(c).unwrap_or_default();
            if uplifts.is_empty() {
                return Err(Error::InvalidInput(format!(
                    "combination {c} has no uplift samples"
                )));
            }
            let variance = (uplifts.len() >= 2).then(|| sample_variance(&uplifts));
            Ok(CombinationStats {
                combination: c.clone(),
                mean: mean(&uplifts),
                count: uplifts.len(),
                variance,
                uplifts,
            })
        })
        .collect()
}

/// When two combinations count as the same state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergePolicy {
    /// Pairs with Welch p-value at or above this are merged.
    pub test_alpha: f64,
    /// Relative mean difference tolerated when a group has fewer than two samples.
    pub fallback_rel_tol: f64,
}

impl Default for MergePolicy {
    fn default() -> Self {
        Self {
            test_alpha: 0.05,
            fallback_rel_tol: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MergeEvidence {
    Welch { p_value: f64 },
    RelativeDifference { value: f64 },
}

/// Pairwise comparison between combinations `a` and `b` (labels 1..k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeDecision {
    pub a: usize,
    pub b: usize,
    pub evidence: MergeEvidence,
    pub merged: bool,
}

/// One demand uplift state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpliftState {
    pub label: usize,
    pub members: Vec<EventCombination>,
    /// Sample-weighted mean uplift of the members. For a state added by hand
    /// without samples this is the expected uplift supplied at the time.
    pub mean_uplift: f64,
    pub sample_count: usize,
}

/// Mapping from event combinations to demand uplift states `1..=m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateMap {
    /// Factors the combinations are defined over.
    pub factors: Vec<String>,
    pub states: Vec<UpliftState>,
}

impl StateMap {
    /// Number of states.
    pub fn m(&self) -> usize {
        self.states.len()
    }

    /// Number of indexed combinations.
    pub fn k(&self) -> usize {
        self.states.iter().map(|s| s.members.len()).sum()
    }

    /// State label of a combination already restricted to `factors`.
    pub fn state_of(&self, combination: &EventCombination) -> Option<usize> {
        self.states
            .iter()
            .find(|s| s.members.contains(combination))
            .map(|s| s.label)
    }

    /// State label of a calendar event (projected onto `factors` first).
    pub fn state_of_event(&self, event: &EventCombination) -> Option<usize> {
        self.state_of(&event.project(&self.factors))
    }

    pub fn combination_index(&self) -> BTreeMap<EventCombination, usize> {
        self.states
            .iter()
            .flat_map(|s| s.members.iter().map(move |c| (c.clone(), s.label)))
            .collect()
    }

    pub fn state(&self, label: usize) -> Option<&UpliftState> {
        label.checked_sub(1).and_then(|i| self.states.get(i))
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Merge combinations with indistinguishable mean uplift (transitive closure
/// of the pairwise decisions) and label the states by descending mean uplift.
pub fn merge_into_states(
    stats: &[CombinationStats],
    factors: &[String],
    policy: MergePolicy,
) -> Result<(StateMap, Vec<MergeDecision>)> {
    if stats.is_empty() {
        return Err(Error::InvalidInput("no combinations to merge".into()));
    }
    let k = stats.len();
    let mut parent: Vec<usize> = (0..k).collect();
    let mut decisions = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            let (a, b) = (&stats[i], &stats[j]);
            let (evidence, merged) = if a.count >= 2 && b.count >= 2 {
                let p = welch_t_test(&a.uplifts, &b.uplifts)?.p_value.unwrap_or(1.0);
                (MergeEvidence::Welch { p_value: p }, p >= policy.test_alpha)
            } else {
                let denom = a.mean.abs().max(b.mean.abs());
                let rel = if denom == 0.0 {
                    0.0
                } else {
                    (a.mean - b.mean).abs() / denom
                };
                (
                    MergeEvidence::RelativeDifference { value: rel },
                    rel <= policy.fallback_rel_tol,
                )
            };
            if merged {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                parent[ri.max(rj)] = ri.min(rj);
            }
            decisions.push(MergeDecision {
                a: i + 1,
                b: j + 1,
                evidence,
                merged,
            });
        }
    }

    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..k {
        let r = find(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut states: Vec<UpliftState> = groups
        .into_values()
        .map(|idx| {
            let count: usize = idx.iter().map(|&i| stats[i].count).sum();
            let total: f64 = idx.iter().flat_map(|&i| stats[i].uplifts.iter()).sum();
            UpliftState {
                label: 0,
                members: idx.iter().map(|&i| stats[i].combination.clone()).collect(),
                mean_uplift: total / count as f64,
                sample_count: count,
            }
        })
        .collect();
    // groups are keyed by their smallest member, so the sort is stable on ties
    states.sort_by(|a, b| b.mean_uplift.total_cmp(&a.mean_uplift));
    for (i, s) in states.iter_mut().enumerate() {
        s.label = i + 1;
    }
    Ok((
        StateMap {
            factors: factors.to_vec(),
            states,
        },
        decisions,
    ))
}

/// How to place a combination the state map has not seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AssignMode {
    /// State whose mean uplift is closest to the expected uplift.
    Nearest,
    /// A fresh state `m + 1`.
    NewState,
    /// The given state label.
    Manual(usize),
}

/// Return a copy of `state_map` that also indexes `combination`.
pub fn assign_new_combination(
    state_map: &StateMap,
    combination: &EventCombination,
    expected_uplift: Option<f64>,
    mode: AssignMode,
) -> Result<StateMap> {
    let combination = combination.project(&state_map.factors);
    if let Some(j) = state_map.state_of(&combination) {
        return Err(Error::InvalidInput(format!(
            "combination {combination} is already in state {j}"
        )));
    }
    let mut out = state_map.clone();
    match mode {
        AssignMode::Nearest => {
            let target = expected_uplift.ok_or_else(|| {
                Error::InvalidInput("nearest assignment needs an expected uplift".into())
            })?;
            let best = out
                .states
                .iter_mut()
                .min_by(|a, b| {
                    (a.mean_uplift - target)
                        .abs()
                        .total_cmp(&(b.mean_uplift - target).abs())
                })
                .ok_or_else(|| Error::InvalidInput("state map has no states".into()))?;
            best.members.push(combination);
        }
        AssignMode::NewState => {
            let label = out.m() + 1;
            out.states.push(UpliftState {
                label,
                members: vec![combination],
                mean_uplift: expected_uplift.unwrap_or(0.0),
                sample_count: 0,
            });
        }
        AssignMode::Manual(j) => {
            let m = out.m();
            let state = j
                .checked_sub(1)
                .and_then(|i| out.states.get_mut(i))
                .ok_or_else(|| Error::InvalidInput(format!("state {j} outside 1..={m}")))?;
            state.members.push(combination);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DusConfig {
    /// Significance level of the factor screen.
    pub alpha: f64,
    pub merge: MergePolicy,
}

impl Default for DusConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            merge: MergePolicy::default(),
        }
    }
}

/// One decision per line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuditLog(pub Vec<String>);

impl AuditLog {
    fn push(&mut self, line: String) {
        self.0.push(line);
    }
}

impl fmt::Display for AuditLog {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.0 {
            writeln!(f, "{line}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DusOutcome {
    pub state_map: StateMap,
    pub screening: Screening,
    pub combinations: Vec<CombinationStats>,
    pub decisions: Vec<MergeDecision>,
    pub audit: AuditLog,
}

/// Run all five steps; errors carry the step number.
pub fn run_dus(
    demand: &DemandSeries,
    baseline: &[Option<f64>],
    calendar: &EventCalendar,
    candidate_factors: &[EventFactor],
    config: &DusConfig,
) -> Result<DusOutcome> {
    let mut audit = AuditLog::default();
    let samples = compute_uplifts(demand, baseline, calendar).map_err(|e| e.at_step(0))?;
    audit.push(format!(
        "step 0: {} uplift samples from event weeks",
        samples.len()
    ));

    let screening = screen_significant_factors(&samples, candidate_factors, config.alpha)
        .map_err(|e| e.at_step(1))?;
    for w in &screening.warnings {
        audit.push(format!("step 1: warning: {w}"));
    }
    for e in &screening.effects {
        audit.push(format!(
            "step 1: factor {} F = {} (df {}, {}) p = {:e} -> {}",
            e.name,
            e.f,
            e.df_num,
            e.df_den,
            e.p_value,
            if e.p_value < config.alpha {
                "significant"
            } else {
                "dropped"
            }
        ));
    }
    let factors: Vec<EventFactor> = screening
        .significant
        .iter()
        .map(|s| s.factor.clone())
        .collect();

    let combinations = enumerate_combinations(&factors, &samples).map_err(|e| e.at_step(2))?;
    for (i, c) in combinations.iter().enumerate() {
        audit.push(format!("step 2: combination {} = {c}", i + 1));
    }

    let stats =
        average_uplift_per_combination(&samples, &combinations).map_err(|e| e.at_step(3))?;
    for (i, s) in stats.iter().enumerate() {
        audit.push(format!(
            "step 3: combination {} mean uplift {} over {} sample(s)",
            i + 1,
            s.mean,
            s.count
        ));
    }

    let names = screening.factor_names();
    let (state_map, decisions) =
        merge_into_states(&stats, &names, config.merge).map_err(|e| e.at_step(4))?;
    for d in &decisions {
        let ev = match d.evidence {
            MergeEvidence::Welch { p_value } => format!("Welch p = {p_value:e}"),
            MergeEvidence::RelativeDifference { value } => format!("relative difference {value}"),
        };
        audit.push(format!(
            "step 4: combinations {} and {}: {ev} -> {}",
            d.a,
            d.b,
            if d.merged { "merge" } else { "distinct" }
        ));
    }
    let index = state_map.combination_index();
    for (i, c) in combinations.iter().enumerate() {
        audit.push(format!(
            "step 4: combination {} -> state {}",
            i + 1,
            index[c]
        ));
    }
    Ok(DusOutcome {
        state_map,
        screening,
        combinations: stats,
        decisions,
        audit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::WeekKey;

    fn stats(mean: f64, uplifts: &[f64], label: &str) -> CombinationStats {
        CombinationStats {
            combination: EventCombination::from_pairs([("f", label)]),
            mean,
            count: uplifts.len(),
            variance: (uplifts.len() > 1).then(|| sample_variance(uplifts)),
            uplifts: uplifts.to_vec(),
        }
    }

    #[test]
    fn uplift_is_actual_minus_baseline() {
        let f = EventFactor::new("promo", &["major"]).unwrap();
        let demand = DemandSeries::new(WeekKey::Index(0), vec![400.0, 1000.0]).unwrap();
        let cal = EventCalendar::new(
            WeekKey::Index(0),
            vec![f],
            vec![
                None,
                Some(EventCombination::from_pairs([("promo", "major")])),
            ],
        )
        .unwrap();
        let s = compute_uplifts(&demand, &[Some(400.0), Some(400.0)], &cal).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].uplift, 600.0);
        let err = compute_uplifts(&demand, &[Some(400.0), None], &cal).unwrap_err();
        assert!(err.to_string().contains("week 1"));
    }

    #[test]
    fn no_events_no_samples() {
        let demand = DemandSeries::new(WeekKey::Index(0), vec![1.0, 2.0, 3.0]).unwrap();
        let cal = EventCalendar::empty(WeekKey::Index(0), 3, vec![]);
        assert!(compute_uplifts(&demand, &[None; 3], &cal)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn mean_and_singleton_variance() {
        let samples: Vec<UpliftSample> = [(0, "a", 10.0), (1, "a", 20.0), (2, "b", 7.0)]
            .iter()
            .map(|&(w, l, u)| UpliftSample {
                week_index: w,
                combination: EventCombination::from_pairs([("f", l)]),
                uplift: u,
            })
            .collect();
        let f = EventFactor::new("f", &["a", "b"]).unwrap();
        let combos = enumerate_combinations(&[f], &samples).unwrap();
        let st = average_uplift_per_combination(&samples, &combos).unwrap();
        assert_eq!(st[0].mean, 15.0);
        assert_eq!(st[1].mean, 7.0);
        assert_eq!(st[1].variance, None);
    }

    #[test]
    fn single_combination_is_one_state() {
        let (map, _) = merge_into_states(
            &[stats(5.0, &[4.0, 6.0], "a")],
            &["f".into()],
            MergePolicy::default(),
        )
        .unwrap();
        assert_eq!(map.m(), 1);
        assert_eq!(map.states[0].label, 1);
    }

    #[test]
    fn overlapping_small_uplifts_merge() {
        let s = [
            stats(16.0, &[12.0, 20.0, 14.0, 18.0], "a"),
            stats(15.8, &[11.8, 19.8, 13.8, 17.8], "b"),
            stats(311.0, &[300.0, 320.0, 313.0], "c"),
        ];
        let (map, decisions) =
            merge_into_states(&s, &["f".into()], MergePolicy::default()).unwrap();
        assert_eq!(map.m(), 2);
        assert_eq!(map.states[0].mean_uplift, 311.0);
        assert_eq!(map.states[1].members.len(), 2);
        assert_eq!(decisions.len(), 3);
    }

    #[test]
    fn fallback_tolerance_for_singletons() {
        let s = [
            stats(100.0, &[100.0], "a"),
            stats(90.0, &[90.0], "b"),
            stats(50.0, &[50.0], "c"),
        ];
        let (map, _) = merge_into_states(&s, &["f".into()], MergePolicy::default()).unwrap();
        assert_eq!(map.m(), 2);
        assert_eq!(map.states[0].sample_count, 2);
        assert!((map.states[0].mean_uplift - 95.0).abs() < 1e-12);
    }

    fn five_state_map() -> StateMap {
        let means = [19816.0, 14833.0, 5091.0, 4121.0, 3466.0];
        StateMap {
            factors: vec!["f".into()],
            states: means
                .iter()
                .enumerate()
                .map(|(i, &m)| UpliftState {
                    label: i + 1,
                    members: vec![EventCombination::from_pairs([("f", format!("c{i}"))])],
                    mean_uplift: m,
                    sample_count: 3,
                })
                .collect(),
        }
    }

    #[test]
    fn assign_modes() {
        let map = five_state_map();
        let new = EventCombination::from_pairs([("f", "new")]);
        let near = assign_new_combination(&map, &new, Some(5000.0), AssignMode::Nearest).unwrap();
        assert_eq!(near.state_of(&new), Some(3));
        assert_eq!(near.state(3).unwrap().mean_uplift, 5091.0);

        let fresh = assign_new_combination(&map, &new, None, AssignMode::NewState).unwrap();
        assert_eq!(fresh.m(), 6);
        assert_eq!(fresh.state_of(&new), Some(6));

        let manual = assign_new_combination(&map, &new, None, AssignMode::Manual(2)).unwrap();
        assert_eq!(manual.combination_index()[&new], 2);

        assert!(assign_new_combination(&map, &new, None, AssignMode::Nearest).is_err());
        assert!(assign_new_combination(&map, &new, None, AssignMode::Manual(7)).is_err());
        assert!(assign_new_combination(&map, &new, None, AssignMode::Manual(0)).is_err());
        let existing = EventCombination::from_pairs([("f", "c0")]);
        assert!(assign_new_combination(&map, &existing, None, AssignMode::NewState).is_err());
    }
}
