//! Weekly demand series, event factors and event calendars.

use std::collections::BTreeMap;
use std::fmt;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Week label: an integer index or the ISO-8601 date the week starts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum WeekKey {
    Index(i64),
    Date(NaiveDate),
}

impl WeekKey {
    /// The week `offset` weeks after this one.
    pub fn offset(self, offset: i64) -> WeekKey {
        match self {
            WeekKey::Index(i) => WeekKey::Index(i + offset),
            WeekKey::Date(d) => WeekKey::Date(d + Duration::weeks(offset)),
        }
    }

    /// Number of weeks from `self` to `other`, if both use the same scheme
    /// and are a whole number of weeks apart.
    pub fn weeks_until(self, other: WeekKey) -> Option<i64> {
        match (self, other) {
            (WeekKey::Index(a), WeekKey::Index(b)) => Some(b - a),
            (WeekKey::Date(a), WeekKey::Date(b)) => {
                let days = (b - a).num_days();
                (days % 7 == 0).then_some(days / 7)
            }
            _ => None,
        }
    }

    pub fn parse(s: &str) -> Option<WeekKey> {
        let s = s.trim();
        if let Ok(i) = s.parse::<i64>() {
            return Some(WeekKey::Index(i));
        }
        NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .ok()
            .map(WeekKey::Date)
    }

    pub fn is_date(self) -> bool {
        matches!(self, WeekKey::Date(_))
    }
}

impl fmt::Display for WeekKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeekKey::Index(i) => write!(f, "{i}"),
            WeekKey::Date(d) => write!(f, "{}", d.format("%Y-%m-%d")),
        }
    }
}

/// Contiguous weekly demand observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    pub start_week: WeekKey,
    pub values: Vec<f64>,
    /// Number of lag-1 differences already applied to `values`.
    pub differencing_applied: usize,
}

impl DemandSeries {
    pub fn new(start_week: WeekKey, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite demand at week {}",
                start_week.offset(i as i64)
            )));
        }
        Ok(Self {
            start_week,
            values,
            differencing_applied: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn week(&self, i: usize) -> WeekKey {
        self.start_week.offset(i as i64)
    }

    /// Weeks `range` as a new series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> DemandSeries {
        DemandSeries {
            start_week: self.week(range.start),
            values: self.values[range].to_vec(),
            differencing_applied: self.differencing_applied,
        }
    }

    /// One lag-1 difference; the result starts one week later.
    pub fn difference(&self) -> DemandSeries {
        DemandSeries {
            start_week: self.week(1),
            values: self.values.windows(2).map(|w| w[1] - w[0]).collect(),
            differencing_applied: self.differencing_applied + 1,
        }
    }
}

/// A systematic event and its possible levels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFactor {
    pub name: String,
    pub levels: Vec<String>,
}

impl EventFactor {
    pub fn new(name: impl Into<String>, levels: &[&str]) -> Result<Self> {
        let name = name.into();
        let levels: Vec<String> = levels.iter().map(|s| s.to_string()).collect();
        let mut seen = std::collections::BTreeSet::new();
        if levels.is_empty() {
            return Err(Error::InvalidInput(format!("factor {name} has no levels")));
        }
        if let Some(dup) = levels.iter().find(|l| !seen.insert(*l)) {
            return Err(Error::InvalidInput(format!(
                "factor {name} lists level {dup} twice"
            )));
        }
        Ok(Self { name, levels })
    }

    pub fn has_level(&self, level: &str) -> bool {
        self.levels.iter().any(|l| l == level)
    }
}

/// Assignment of one level per factor. Ordered by factor name, then level.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EventCombination(pub BTreeMap<String, String>);

impl EventCombination {
    pub fn from_pairs<K: Into<String>, V: Into<String>>(
        pairs: impl IntoIterator<Item = (K, V)>,
    ) -> Self {
        Self(
            pairs
                .into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }

    pub fn level(&self, factor: &str) -> Option<&str> {
        self.0.get(factor).map(String::as_str)
    }

    /// Restrict to the named factors.
    pub fn project(&self, factors: &[String]) -> EventCombination {
        EventCombination(
            self.0
                .iter()
                .filter(|(k, _)| factors.contains(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        )
    }
}

impl fmt::Display for EventCombination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}

/// Per-week event assignments aligned to a demand series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventCalendar {
    pub start_week: WeekKey,
    pub factors: Vec<EventFactor>,
    /// `None` for weeks without an event.
    pub events: Vec<Option<EventCombination>>,
}

impl EventCalendar {
    pub fn new(
        start_week: WeekKey,
        factors: Vec<EventFactor>,
        events: Vec<Option<EventCombination>>,
    ) -> Result<Self> {
        let cal = Self {
            start_week,
            factors,
            events,
        };
        cal.validate()?;
        Ok(cal)
    }

    /// A calendar with no events.
    pub fn empty(start_week: WeekKey, len: usize, factors: Vec<EventFactor>) -> Self {
        Self {
            start_week,
            factors,
            events: vec![None; len],
        }
    }

    fn validate(&self) -> Result<()> {
        for (i, ev) in self.events.iter().enumerate() {
            let Some(c) = ev else { continue };
            if c.0.len() != self.factors.len() {
                return Err(Error::InvalidInput(format!(
                    "week {}: event must assign every factor",
                    self.week(i)
                )));
            }
            for f in &self.factors {
                match c.level(&f.name) {
                    Some(l) if f.has_level(l) => {}
                    Some(l) => {
                        return Err(Error::InvalidInput(format!(
                            "week {}: level {l} is not declared for factor {}",
                            self.week(i),
                            f.name
                        )))
                    }
                    None => {
                        return Err(Error::InvalidInput(format!(
                            "week {}: factor {} missing",
                            self.week(i),
                            f.name
                        )))
                    }
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn week(&self, i: usize) -> WeekKey {
        self.start_week.offset(i as i64)
    }

    pub fn event_count(&self) -> usize {
        self.events.iter().filter(|e| e.is_some()).count()
    }

    pub fn event_mask(&self) -> Vec<bool> {
        self.events.iter().map(Option::is_some).collect()
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> EventCalendar {
        EventCalendar {
            start_week: self.week(range.start),
            factors: self.factors.clone(),
            events: self.events[range].to_vec(),
        }
    }

    pub fn factor(&self, name: &str) -> Option<&EventFactor> {
        self.factors.iter().find(|f| f.name == name)
    }
}
