//! Filter-then-rank hybrid retrieval.
//!
//! Hard constraints (geography, day/time, ID policy) remove candidates before
//! semantic ranking, so no ranked hit can violate a stated constraint.
//! Records whose hours or ID policy are unknown survive the matching filter
//! with a flag instead of being dropped.

use std::collections::{BTreeMap, HashSet};

use crate::model::{
    ConstraintSet, FilterKind, FilterStep, FlagSet, Hit, HitFlag, IdConstraint, IdRequirement, PantryRecord,
    RetrievalResult,
};
use crate::vector::{EmbeddingProvider, IndexError, ProviderError, VectorIndex};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilterOutcome {
    /// Surviving ids in dataset order.
    pub survivors: Vec<String>,
    pub trace: Vec<FilterStep>,
    pub flags: BTreeMap<String, FlagSet>,
}

impl FilterOutcome {
    pub fn survivor_set(&self) -> HashSet<String> {
        self.survivors.iter().cloned().collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RetrieveError {
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Index(#[from] IndexError),
}

fn eq_fold(a: &str, b: &str) -> bool {
    a.trim().to_lowercase() == b.trim().to_lowercase()
}

pub fn apply_hard_filters(records: &[PantryRecord], cs: &ConstraintSet) -> FilterOutcome {
    let mut pool: Vec<&PantryRecord> = records.iter().collect();
    let mut trace = Vec::new();
    let mut flags: BTreeMap<String, FlagSet> = BTreeMap::new();

    let mut step = |pool: &mut Vec<&PantryRecord>, kind: FilterKind, value: String, keep: &dyn Fn(&PantryRecord) -> bool| {
        let before = pool.len();
        pool.retain(|r| keep(r));
        trace.push(FilterStep { kind, value, before, after: pool.len() });
    };

    if let Some(county) = &cs.county {
        step(&mut pool, FilterKind::County, county.clone(), &|r| eq_fold(&r.county, county));
    }
    if let Some(city) = &cs.city {
        step(&mut pool, FilterKind::City, city.clone(), &|r| eq_fold(&r.city, city));
    }
    if let Some(zip) = &cs.zip {
        step(&mut pool, FilterKind::Zip, zip.clone(), &|r| r.zip == *zip);
    }
    if let Some(day) = cs.day {
        step(&mut pool, FilterKind::Day, day.to_string(), &|r| !r.hours.is_known() || r.hours.open_on(day));
    }
    if let Some(minute) = cs.time_min {
        step(&mut pool, FilterKind::Time, minute.to_string(), &|r| {
            !r.hours.is_known() || r.hours.open_at(cs.day, minute)
        });
    }
    if cs.id_constraint == Some(IdConstraint::NoIdRequired) {
        step(&mut pool, FilterKind::IdRequirement, "no_id_required".into(), &|r| {
            r.id_requirement != IdRequirement::Required
        });
    }

    let hours_filtered = cs.day.is_some() || cs.time_min.is_some();
    for r in &pool {
        let mut f = FlagSet::new();
        if hours_filtered && !r.hours.is_known() {
            f.insert(HitFlag::UnknownHours);
        }
        if cs.id_constraint.is_some() && r.id_requirement == IdRequirement::Unknown {
            f.insert(HitFlag::UnknownEligibility);
        }
        if !f.is_empty() {
            flags.insert(r.id.clone(), f);
        }
    }

    FilterOutcome {
        survivors: pool.iter().map(|r| r.id.clone()).collect(),
        trace,
        flags,
    }
}

const STREET_TYPES: &[(&str, &str)] = &[
    ("st", "street"),
    ("ave", "avenue"),
    ("av", "avenue"),
    ("rd", "road"),
    ("blvd", "boulevard"),
    ("dr", "drive"),
];

/// Case-folded tokens with street-type abbreviations expanded.
pub fn canonical_street_tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| {
            let t = t.to_lowercase();
            STREET_TYPES
                .iter()
                .find(|(abbr, _)| *abbr == t)
                .map(|(_, full)| full.to_string())
                .unwrap_or(t)
        })
        .collect()
}

fn contains_run(hay: &[String], needle: &[String]) -> bool {
    needle.is_empty() || hay.windows(needle.len()).any(|w| w == needle)
}

pub fn exact_recall_lookup(records: &[PantryRecord], cs: &ConstraintSet) -> Vec<String> {
    if cs.zip.is_none() && cs.street_fragment.is_none() {
        return Vec::new();
    }
    let fragment = cs.street_fragment.as_deref().map(canonical_street_tokens);
    records
        .iter()
        .filter(|r| cs.zip.as_ref().is_none_or(|z| r.zip == *z))
        .filter(|r| {
            fragment
                .as_ref()
                .is_none_or(|f| contains_run(&canonical_street_tokens(&r.street_address), f))
        })
        .map(|r| r.id.clone())
        .collect()
}

pub struct RetrieveRequest<'a> {
    pub constraints: &'a ConstraintSet,
    /// Text embedded for semantic ranking.
    pub query: &'a str,
    pub k: usize,
}

pub fn retrieve(
    req: &RetrieveRequest<'_>,
    records: &[PantryRecord],
    index: &VectorIndex,
    provider: &dyn EmbeddingProvider,
) -> Result<RetrievalResult, RetrieveError> {
    let cs = req.constraints;
    let k = req.k.max(1);
    let filtered = apply_hard_filters(records, cs);
    let allowed = filtered.survivor_set();
    let flags_for = |id: &str| filtered.flags.get(id).cloned().unwrap_or_default();

    let mut hits: Vec<Hit> = Vec::new();
    let mut exact_matches = Vec::new();
    if cs.exact_recall {
        exact_matches = exact_recall_lookup(records, cs)
            .into_iter()
            .filter(|id| allowed.contains(id))
            .collect();
        hits.extend(exact_matches.iter().map(|id| Hit {
            pantry_id: id.clone(),
            score: 1.0,
            flags: flags_for(id),
        }));
    }

    if hits.len() < k && !allowed.is_empty() {
        let pad: HashSet<String> = allowed
            .iter()
            .filter(|id| !exact_matches.contains(id))
            .cloned()
            .collect();
        if !pad.is_empty() {
            let qv = provider.embed(req.query)?;
            for (id, score) in index.search(&qv, k - hits.len(), Some(&pad))? {
                hits.push(Hit { flags: flags_for(&id), pantry_id: id, score });
            }
        }
    }
    hits.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.pantry_id.cmp(&b.pantry_id)));
    hits.truncate(k);

    Ok(RetrievalResult {
        hits,
        filter_trace: filtered.trace,
        exact_matches,
    })
}
