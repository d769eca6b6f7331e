//! Canonical domain types shared by every stage of the pipeline.
//!
//! The JSON encoding of [`PantryRecord`] is the interchange format between
//! ingestion and everything downstream, so field names here are part of the
//! external contract.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const MINUTES_PER_DAY: u16 = 1440;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Day {
    Mon,
    Tue,
    Wed,
    Thu,
    Fri,
    Sat,
    Sun,
}

impl Day {
    pub const ALL: [Day; 7] = [
        Day::Mon,
        Day::Tue,
        Day::Wed,
        Day::Thu,
        Day::Fri,
        Day::Sat,
        Day::Sun,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Day> {
        Day::ALL.get(i).copied()
    }

    pub fn full_name(self) -> &'static str {
        match self {
            Day::Mon => "Monday",
            Day::Tue => "Tuesday",
            Day::Wed => "Wednesday",
            Day::Thu => "Thursday",
            Day::Fri => "Friday",
            Day::Sat => "Saturday",
            Day::Sun => "Sunday",
        }
    }

    /// Accepts full names, common abbreviations and plurals, case-insensitively.
    pub fn parse_token(token: &str) -> Option<Day> {
        let t = token.trim().trim_end_matches('.').to_ascii_lowercase();
        let t = t.as_str();
        let day = match t {
            "mon" | "mons" | "monday" | "mondays" => Day::Mon,
            "tue" | "tues" | "tuesday" | "tuesdays" => Day::Tue,
            "wed" | "weds" | "wednesday" | "wednesdays" => Day::Wed,
            "thu" | "thur" | "thurs" | "thursday" | "thursdays" => Day::Thu,
            "fri" | "fris" | "friday" | "fridays" => Day::Fri,
            "sat" | "sats" | "saturday" | "saturdays" => Day::Sat,
            "sun" | "suns" | "sunday" | "sundays" => Day::Sun,
            _ => return None,
        };
        Some(day)
    }
}

impl fmt::Display for Day {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Day::Mon => "Mon",
            Day::Tue => "Tue",
            Day::Wed => "Wed",
            Day::Thu => "Thu",
            Day::Fri => "Fri",
            Day::Sat => "Sat",
            Day::Sun => "Sun",
        };
        f.write_str(s)
    }
}

impl FromStr for Day {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Day::parse_token(s).ok_or_else(|| format!("unknown day token `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpenInterval {
    pub day: Day,
    pub open_min: u16,
    pub close_min: u16,
}

impl OpenInterval {
    pub fn contains(&self, minute: u16) -> bool {
        self.open_min <= minute && minute < self.close_min
    }

    fn overlaps(&self, other: &OpenInterval) -> bool {
        self.day == other.day && self.open_min < other.close_min && other.open_min < self.close_min
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParseStatus {
    Parsed,
    Unparsed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeeklySchedule {
    pub intervals: Vec<OpenInterval>,
    pub parse_status: ParseStatus,
}

impl WeeklySchedule {
    pub fn unparsed() -> Self {
        WeeklySchedule {
            intervals: Vec::new(),
            parse_status: ParseStatus::Unparsed,
        }
    }

    pub fn is_known(&self) -> bool {
        self.parse_status == ParseStatus::Parsed
    }

    pub fn open_on(&self, day: Day) -> bool {
        self.intervals.iter().any(|iv| iv.day == day)
    }

    pub fn open_at(&self, day: Option<Day>, minute: u16) -> bool {
        self.intervals
            .iter()
            .any(|iv| day.is_none_or(|d| iv.day == d) && iv.contains(minute))
    }

    /// Invariant violations as human-readable rules; empty when valid.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.parse_status == ParseStatus::Unparsed && !self.intervals.is_empty() {
            out.push("unparsed schedule must have no intervals".to_string());
        }
        for iv in &self.intervals {
            if iv.open_min >= iv.close_min || iv.close_min > MINUTES_PER_DAY {
                out.push(format!(
                    "interval {} {}-{} outside 0 <= open < close <= 1440",
                    iv.day, iv.open_min, iv.close_min
                ));
            }
        }
        for (i, a) in self.intervals.iter().enumerate() {
            for b in &self.intervals[i + 1..] {
                if a.overlaps(b) {
                    out.push(format!(
                        "overlapping intervals on {}: {}-{} and {}-{}",
                        a.day, a.open_min, a.close_min, b.open_min, b.close_min
                    ));
                }
            }
        }
        out
    }

    /// Compact rendering such as `Mon-Fri 9:00am-12:00pm; Sat 10:00am-12:00pm`.
    pub fn display(&self) -> Option<String> {
        if !self.is_known() || self.intervals.is_empty() {
            return None;
        }
        let mut sorted = self.intervals.clone();
        sorted.sort_by_key(|iv| (iv.open_min, iv.close_min, iv.day));
        let mut groups: Vec<(u16, u16, Vec<Day>)> = Vec::new();
        for iv in sorted {
            match groups.last_mut() {
                Some((o, c, days)) if *o == iv.open_min && *c == iv.close_min => days.push(iv.day),
                _ => groups.push((iv.open_min, iv.close_min, vec![iv.day])),
            }
        }
        groups.sort_by_key(|(o, _, days)| (days[0], *o));
        let parts: Vec<String> = groups
            .into_iter()
            .map(|(o, c, mut days)| {
                days.sort();
                format!("{} {}-{}", format_days(&days), format_minute(o), format_minute(c))
            })
            .collect();
        Some(parts.join("; "))
    }
}

fn format_days(days: &[Day]) -> String {
    let mut runs: Vec<(Day, Day)> = Vec::new();
    for &d in days {
        match runs.last_mut() {
            Some((_, end)) if end.index() + 1 == d.index() => *end = d,
            _ => runs.push((d, d)),
        }
    }
    runs.into_iter()
        .map(|(a, b)| match b.index() - a.index() {
            0 => a.to_string(),
            1 => format!("{a}, {b}"),
            _ => format!("{a}-{b}"),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

pub fn format_minute(m: u16) -> String {
    let (h, min) = (m / 60, m % 60);
    let suffix = if h % 24 < 12 { "am" } else { "pm" };
    let h12 = match h % 12 {
        0 => 12,
        x => x,
    };
    format!("{h12}:{min:02}{suffix}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdRequirement {
    Required,
    NotRequired,
    Unknown,
}

impl IdRequirement {
    pub fn label(self) -> &'static str {
        match self {
            IdRequirement::Required => "required",
            IdRequirement::NotRequired => "not required",
            IdRequirement::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contact {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phone: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub email: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub website: Option<String>,
}

impl Contact {
    pub fn is_empty(&self) -> bool {
        self.phone.is_none() && self.email.is_none() && self.website.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PantryRecord {
    pub id: String,
    pub name: String,
    pub street_address: String,
    pub city: String,
    pub county: String,
    pub state: String,
    pub zip: String,
    #[serde(default)]
    pub contact: Contact,
    pub hours: WeeklySchedule,
    #[serde(default)]
    pub hours_raw: String,
    pub id_requirement: IdRequirement,
    #[serde(default)]
    pub eligibility_notes: String,
    #[serde(default)]
    pub notes: String,
    pub source_url: String,
    pub scraped_at: DateTime<Utc>,
}

/// One broken invariant: which field, and which rule.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
}

impl Violation {
    pub fn new(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation {
            field: field.into(),
            rule: rule.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

pub fn is_valid_slug(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'-')
}

pub fn is_zip(s: &str) -> bool {
    s.len() == 5 && s.bytes().all(|b| b.is_ascii_digit())
}

pub fn validate_record(record: &PantryRecord) -> Vec<Violation> {
    let mut out = Vec::new();
    if !is_valid_slug(&record.id) {
        out.push(Violation::new("id", "must be a nonempty slug matching [a-z0-9-]+"));
    }
    if record.name.trim().is_empty() {
        out.push(Violation::new("name", "must be nonempty"));
    }
    if !is_zip(&record.zip) {
        out.push(Violation::new("zip", "must be exactly five ASCII digits"));
    }
    if !(record.state.len() == 2 && record.state.bytes().all(|b| b.is_ascii_uppercase())) {
        out.push(Violation::new("state", "must be two uppercase ASCII letters"));
    }
    for rule in record.hours.violations() {
        out.push(Violation::new("hours", rule));
    }
    out
}

/// Per-record violations plus dataset-level id uniqueness.
pub fn validate_dataset(records: &[PantryRecord]) -> Vec<(String, Violation)> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for r in records {
        for v in validate_record(r) {
            out.push((r.id.clone(), v));
        }
        if !seen.insert(r.id.as_str()) {
            out.push((r.id.clone(), Violation::new("id", "duplicate id within dataset")));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdConstraint {
    NoIdRequired,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub city: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub county: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zip: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub street_fragment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub day: Option<Day>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_min: Option<u16>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_constraint: Option<IdConstraint>,
    #[serde(default)]
    pub ambiguous_location: bool,
    #[serde(default)]
    pub exact_recall: bool,
    #[serde(default)]
    pub raw_query: String,
}

impl ConstraintSet {
    pub fn has_location(&self) -> bool {
        self.city.is_some()
            || self.county.is_some()
            || self.zip.is_some()
            || self.street_fragment.is_some()
    }

    pub fn invariant_holds(&self) -> bool {
        let ambiguous_ok = !self.ambiguous_location || !self.has_location();
        let recall_ok = !self.exact_recall || self.zip.is_some() || self.street_fragment.is_some();
        ambiguous_ok && recall_ok
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HitFlag {
    UnknownEligibility,
    UnknownHours,
}

pub type FlagSet = BTreeSet<HitFlag>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub pantry_id: String,
    pub score: f32,
    #[serde(default)]
    pub flags: FlagSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    County,
    City,
    Zip,
    Day,
    Time,
    IdRequirement,
}

/// One applied hard filter with the candidate counts around it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterStep {
    pub kind: FilterKind,
    pub value: String,
    pub before: usize,
    pub after: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub hits: Vec<Hit>,
    pub filter_trace: Vec<FilterStep>,
    /// Ids found by exact recall lookup (zip + street) before padding.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub exact_matches: Vec<String>,
}

impl RetrievalResult {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.hits.iter().map(|h| h.pantry_id.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResponseKind {
    Answer,
    Clarification,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundedResponse {
    pub kind: ResponseKind,
    pub text: String,
    pub cited_ids: Vec<String>,
    #[serde(default)]
    pub grounding_violations: Vec<String>,
    pub session_id: String,
}
