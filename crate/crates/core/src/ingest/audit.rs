//! Data-quality audit over a normalized dataset.

use std::collections::HashMap;
use std::fmt::Write as _;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{validate_dataset, IdRequirement, PantryRecord};

pub const DEFAULT_FRESHNESS_DAYS: i64 = 180;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DuplicateReason {
    Name,
    Address,
    NameAndAddress,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DuplicatePair {
    pub first: String,
    pub second: String,
    pub reason: DuplicateReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InvalidField {
    pub id: String,
    pub field: String,
    pub rule: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub record_count: usize,
    pub audited_at: DateTime<Utc>,
    pub freshness_days: i64,
    pub invalid: Vec<InvalidField>,
    pub duplicate_pairs: Vec<DuplicatePair>,
    pub unparsed_hours: Vec<String>,
    pub unknown_eligibility: Vec<String>,
    pub missing_county: Vec<String>,
    pub stale: Vec<String>,
}

fn fold(s: &str) -> String {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn audit_dataset(records: &[PantryRecord], now: DateTime<Utc>, freshness_days: i64) -> AuditReport {
    let invalid = validate_dataset(records)
        .into_iter()
        .map(|(id, v)| InvalidField { id, field: v.field, rule: v.rule })
        .collect();

    let mut pairs: HashMap<(usize, usize), DuplicateReason> = HashMap::new();
    let mut by_name: HashMap<String, Vec<usize>> = HashMap::new();
    let mut by_address: HashMap<(String, String), Vec<usize>> = HashMap::new();
    for (i, r) in records.iter().enumerate() {
        by_name.entry(fold(&r.name)).or_default().push(i);
        let street = fold(&r.street_address);
        if !street.is_empty() {
            by_address.entry((street, r.zip.clone())).or_default().push(i);
        }
    }
    for group in by_name.values() {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                pairs.insert((i, j), DuplicateReason::Name);
            }
        }
    }
    for group in by_address.values() {
        for (a, &i) in group.iter().enumerate() {
            for &j in &group[a + 1..] {
                pairs
                    .entry((i, j))
                    .and_modify(|r| *r = DuplicateReason::NameAndAddress)
                    .or_insert(DuplicateReason::Address);
            }
        }
    }
    let mut keys: Vec<_> = pairs.into_iter().collect();
    keys.sort_by_key(|((i, j), _)| (*i, *j));
    let duplicate_pairs = keys
        .into_iter()
        .map(|((i, j), reason)| DuplicatePair {
            first: records[i].id.clone(),
            second: records[j].id.clone(),
            reason,
        })
        .collect();

    let ids_where = |pred: &dyn Fn(&PantryRecord) -> bool| -> Vec<String> {
        records.iter().filter(|r| pred(r)).map(|r| r.id.clone()).collect()
    };
    let threshold = Duration::days(freshness_days);

    AuditReport {
        record_count: records.len(),
        audited_at: now,
        freshness_days,
        invalid,
        duplicate_pairs,
        unparsed_hours: ids_where(&|r| !r.hours.is_known()),
        unknown_eligibility: ids_where(&|r| r.id_requirement == IdRequirement::Unknown),
        missing_county: ids_where(&|r| r.county.trim().is_empty()),
        stale: ids_where(&|r| now.signed_duration_since(r.scraped_at) > threshold),
    }
}

impl AuditReport {
    pub fn has_findings(&self) -> bool {
        !(self.invalid.is_empty()
            && self.duplicate_pairs.is_empty()
            && self.unparsed_hours.is_empty()
            && self.unknown_eligibility.is_empty()
            && self.missing_county.is_empty()
            && self.stale.is_empty())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "audited {} records at {}", self.record_count, self.audited_at.to_rfc3339());
        let mut section = |title: &str, ids: Vec<String>| {
            let _ = writeln!(out, "{title}: {}", ids.len());
            for id in ids {
                let _ = writeln!(out, "  - {id}");
            }
        };
        section(
            "invalid fields",
            self.invalid.iter().map(|v| format!("{} {}: {}", v.id, v.field, v.rule)).collect(),
        );
        section(
            "duplicate pairs",
            self.duplicate_pairs
                .iter()
                .map(|p| format!("{} / {} ({:?})", p.first, p.second, p.reason))
                .collect(),
        );
        section("unparsed hours", self.unparsed_hours.clone());
        section("unknown eligibility", self.unknown_eligibility.clone());
        section("missing county", self.missing_county.clone());
        section(&format!("stale (> {} days)", self.freshness_days), self.stale.clone());
        out
    }
}
