//! Rule-based constraint extraction from natural-language queries.
//!
//! Rules run in a fixed order: county (`<Name> County`), zip, city (longest
//! gazetteer match), street fragment (`on <tokens> <street type>`), day and
//! time, ID constraint, then the derived ambiguity and recall flags. Phrase
//! lists live in `data/query_patterns.json`.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gazetteer::Gazetteer;
use crate::model::{ConstraintSet, Day, IdConstraint};

const DEFAULT_PATTERNS: &str = include_str!("../../../data/query_patterns.json");

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("malformed pattern file: {0}")]
    Malformed(#[from] serde_json::Error),
    #[error("bad regex `{pattern}`: {source}")]
    Regex {
        pattern: String,
        #[source]
        source: regex::Error,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatternFile {
    pub version: String,
    pub relative_location: Vec<String>,
    pub street_types: Vec<String>,
    pub no_id: Vec<String>,
}

pub struct QueryParser {
    relative: Vec<Regex>,
    no_id: Vec<Regex>,
    street: Regex,
    zip: Regex,
    time: Regex,
}

static DEFAULT_PARSER: LazyLock<QueryParser> =
    LazyLock::new(|| QueryParser::from_json(DEFAULT_PATTERNS).expect("bundled patterns are valid"));

struct Token<'a> {
    lower: String,
    _text: &'a str,
}

fn tokens(query: &str) -> Vec<Token<'_>> {
    query
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| Token { lower: t.to_lowercase(), _text: t })
        .collect()
}

fn compile(pattern: &str) -> Result<Regex, PatternError> {
    Regex::new(pattern).map_err(|source| PatternError::Regex {
        pattern: pattern.to_string(),
        source,
    })
}

impl QueryParser {
    pub fn from_patterns(file: &PatternFile) -> Result<Self, PatternError> {
        let relative = file
            .relative_location
            .iter()
            .map(|p| compile(&format!(r"\b{}\b", regex::escape(&p.to_lowercase()))))
            .collect::<Result<_, _>>()?;
        let no_id = file.no_id.iter().map(|p| compile(p)).collect::<Result<_, _>>()?;
        let types = file
            .street_types
            .iter()
            .map(|t| regex::escape(t))
            .collect::<Vec<_>>()
            .join("|");
        let street = compile(&format!(
            r"(?i)\bon\s+((?:[A-Za-z0-9][A-Za-z0-9.'-]*\s+){{1,4}}?(?:{types}))\b"
        ))?;
        Ok(QueryParser {
            relative,
            no_id,
            street,
            zip: compile(r"\b(\d{5})\b")?,
            time: compile(r"\b(?:at|by|around|after|before)\s+(?:(noon)|(\d{1,2})(?::(\d{2}))?\s*(am|pm)\b)")?,
        })
    }

    pub fn from_json(json: &str) -> Result<Self, PatternError> {
        Self::from_patterns(&serde_json::from_str(json)?)
    }

    pub fn bundled() -> &'static QueryParser {
        &DEFAULT_PARSER
    }

    pub fn extract(&self, query: &str, gaz: &Gazetteer) -> ConstraintSet {
        let toks = tokens(query);
        let mut consumed = vec![false; toks.len()];
        let mut cs = ConstraintSet {
            raw_query: query.to_string(),
            ..ConstraintSet::default()
        };

        // 1. "<Name> County", longest name first
        'county: for (i, t) in toks.iter().enumerate() {
            if t.lower != "county" {
                continue;
            }
            for n in (1..=3.min(i)).rev() {
                let key = toks[i - n..i].iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" ");
                if let Some(county) = gaz.county(&key) {
                    cs.county = Some(county.to_string());
                    consumed[i - n..=i].iter_mut().for_each(|c| *c = true);
                    break 'county;
                }
            }
        }

        // 2. zip
        cs.zip = self.zip.captures(query).map(|c| c[1].to_string());

        // 3. city: longest whole-word gazetteer match outside the county phrase
        let mut best: Option<(usize, usize, &str)> = None;
        for start in 0..toks.len() {
            for n in 1..=gaz.max_city_words().min(toks.len() - start) {
                if consumed[start..start + n].iter().any(|c| *c) {
                    break;
                }
                let key = toks[start..start + n].iter().map(|t| t.lower.as_str()).collect::<Vec<_>>().join(" ");
                if let Some(city) = gaz.city_by_key(&key) {
                    if best.is_none_or(|(bn, _, _)| n > bn) {
                        best = Some((n, start, city));
                    }
                }
            }
        }
        cs.city = best.map(|(_, _, c)| c.to_string());

        // 4. street fragment
        cs.street_fragment = self
            .street
            .captures(query)
            .map(|c| c[1].split_whitespace().collect::<Vec<_>>().join(" "));

        // 5. day and optional time
        cs.day = toks.iter().find_map(|t| Day::parse_token(&t.lower));
        let lowered = normalize_text(query);
        cs.time_min = self.time.captures(&lowered).and_then(|c| {
            if c.get(1).is_some() {
                return Some(12 * 60);
            }
            let h: u16 = c[2].parse().ok()?;
            let m: u16 = c.get(3).map_or(Some(0), |m| m.as_str().parse().ok())?;
            if !(1..=12).contains(&h) || m > 59 {
                return None;
            }
            let pm = &c[4] == "pm";
            Some((h % 12 + if pm { 12 } else { 0 }) * 60 + m)
        });

        // 6. ID constraint; requires an explicit negator
        if self.no_id.iter().any(|re| re.is_match(&lowered)) {
            cs.id_constraint = Some(IdConstraint::NoIdRequired);
        }

        // 7-8. derived flags
        cs.ambiguous_location = !cs.has_location() && self.relative.iter().any(|re| re.is_match(&lowered));
        cs.exact_recall = cs.zip.is_some() || cs.street_fragment.is_some();
        cs
    }
}

fn normalize_text(s: &str) -> String {
    s.to_lowercase()
        .replace(['’', '‘'], "'")
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Extracts constraints with the bundled phrase lists.
pub fn extract_constraints(query: &str, gaz: &Gazetteer) -> ConstraintSet {
    QueryParser::bundled().extract(query, gaz)
}

/// True when no location field is present; such queries need clarification.
pub fn is_underspecified(cs: &ConstraintSet) -> bool {
    !cs.has_location()
}

/// Combines a pending (clarified) constraint set with the user's follow-up.
/// Location fields move as a group: when the follow-up names any location it
/// replaces the prior location entirely.
pub fn merge_constraints(prior: &ConstraintSet, followup: &ConstraintSet) -> ConstraintSet {
    let loc = if followup.has_location() { followup } else { prior };
    let mut merged = ConstraintSet {
        city: loc.city.clone(),
        county: loc.county.clone(),
        zip: loc.zip.clone(),
        street_fragment: loc.street_fragment.clone(),
        day: followup.day.or(prior.day),
        time_min: followup.time_min.or(prior.time_min),
        id_constraint: followup.id_constraint.or(prior.id_constraint),
        ambiguous_location: false,
        exact_recall: false,
        raw_query: [prior.raw_query.trim(), followup.raw_query.trim()]
            .iter()
            .filter(|s| !s.is_empty())
            .copied()
            .collect::<Vec<_>>()
            .join(" "),
    };
    merged.ambiguous_location =
        !merged.has_location() && (prior.ambiguous_location || followup.ambiguous_location);
    merged.exact_recall = merged.zip.is_some() || merged.street_fragment.is_some();
    merged
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn gaz() -> Gazetteer {
        Gazetteer::kansas()
    }

    #[test]
    fn county_pattern() {
        let cs = extract_constraints("Where can I find food pantries in Sedgwick County?", &gaz());
        assert_eq!(cs.county.as_deref(), Some("Sedgwick"));
        assert_eq!(cs.city, None);
        assert!(!cs.ambiguous_location && !cs.exact_recall);
    }

    #[test]
    fn bare_sedgwick_is_the_city() {
        let cs = extract_constraints("pantries in sedgwick", &gaz());
        assert_eq!(cs.city.as_deref(), Some("Sedgwick"));
        assert_eq!(cs.county, None);
    }

    #[test]
    fn wichita_county_vs_city() {
        let cs = extract_constraints("food in Wichita County", &gaz());
        assert_eq!(cs.county.as_deref(), Some("Wichita"));
        assert_eq!(cs.city, None);
        let cs = extract_constraints("food in Wichita", &gaz());
        assert_eq!(cs.city.as_deref(), Some("Wichita"));
    }

    #[test]
    fn longest_city_wins() {
        let cs = extract_constraints("pantry in south hutchinson please", &gaz());
        assert_eq!(cs.city.as_deref(), Some("South Hutchinson"));
        let cs = extract_constraints("help in Kansas City", &gaz());
        assert_eq!(cs.city.as_deref(), Some("Kansas City"));
    }

    #[test]
    fn day_and_time() {
        let cs = extract_constraints("Are there food pantries in Derby open on Wednesdays?", &gaz());
        assert_eq!(cs.city.as_deref(), Some("Derby"));
        assert_eq!(cs.day, Some(Day::Wed));
        assert_eq!(cs.street_fragment, None);
        let cs = extract_constraints("open Friday at 1:30 pm in Newton", &gaz());
        assert_eq!(cs.time_min, Some(810));
        let cs = extract_constraints("open sat at noon", &gaz());
        assert_eq!(cs.time_min, Some(720));
    }

    #[test]
    fn id_patterns_need_negation() {
        let g = gaz();
        for q in [
            "Find food pantries in Maize that do not require any ID.",
            "pantry with no ID in Derby",
            "somewhere I can go without an id",
            "I don't need to show ID right?",
            "places that don’t require photo id",
        ] {
            assert_eq!(extract_constraints(q, &g).id_constraint, Some(IdConstraint::NoIdRequired), "{q}");
        }
        for q in ["bring your ID to the Derby pantry", "what id do I need", "idaho"] {
            assert_eq!(extract_constraints(q, &g).id_constraint, None, "{q}");
        }
    }

    #[test]
    fn recall_query() {
        let cs = extract_constraints("Where is the pantry I went to in 67214 on 21st Street?", &gaz());
        assert_eq!(cs.zip.as_deref(), Some("67214"));
        assert_eq!(cs.street_fragment.as_deref(), Some("21st Street"));
        assert!(cs.exact_recall);
        assert_eq!(cs.city, None);
    }

    #[test]
    fn ambiguous_query() {
        let cs = extract_constraints("Where can I get free food near me?", &gaz());
        assert!(cs.ambiguous_location);
        assert!(is_underspecified(&cs));
        let cs = extract_constraints("food near me in Derby", &gaz());
        assert!(!cs.ambiguous_location);
    }

    #[test]
    fn unknown_city_sets_nothing() {
        let cs = extract_constraints("pantries in Gotham", &gaz());
        assert!(!cs.has_location());
    }

    #[test]
    fn underspecified() {
        let mut cs = ConstraintSet { county: Some("Sedgwick".into()), ..Default::default() };
        assert!(!is_underspecified(&cs));
        cs = ConstraintSet { day: Some(Day::Wed), ..Default::default() };
        assert!(is_underspecified(&cs));
        cs = ConstraintSet { ambiguous_location: true, ..Default::default() };
        assert!(is_underspecified(&cs));
    }

    #[test]
    fn merge_rules() {
        let g = gaz();
        let prior = extract_constraints("Where can I get free food near me?", &g);
        let m = merge_constraints(&prior, &extract_constraints("Wichita", &g));
        assert_eq!(m.city.as_deref(), Some("Wichita"));
        assert!(!m.ambiguous_location);
        assert_eq!(m.raw_query, "Where can I get free food near me? Wichita");

        let prior = ConstraintSet { day: Some(Day::Wed), ..Default::default() };
        let m = merge_constraints(&prior, &extract_constraints("Derby", &g));
        assert_eq!((m.city.as_deref(), m.day), (Some("Derby"), Some(Day::Wed)));

        let prior = ConstraintSet { city: Some("Derby".into()), ..Default::default() };
        let m = merge_constraints(&prior, &extract_constraints("Maize", &g));
        assert_eq!(m.city.as_deref(), Some("Maize"));

        let m = merge_constraints(&prior, &extract_constraints("open monday", &g));
        assert_eq!(m.city.as_deref(), Some("Derby"));
        assert_eq!(m.day, Some(Day::Mon));
    }

    #[test]
    fn case_insensitive_cities() {
        let g = gaz();
        let a = extract_constraints("pantries in derby", &g);
        let b = extract_constraints("pantries in Derby", &g);
        assert_eq!(a.city, b.city);
    }

    proptest! {
        #[test]
        fn invariant_holds_for_fuzzed_queries(q in "[A-Za-z0-9 ,.?']{0,60}", suffix in prop::sample::select(vec!["", " near me", " nearby", " in Derby", " Sedgwick County", " 67214", " on Main St"])) {
            let cs = extract_constraints(&format!("{q}{suffix}"), &gaz());
            prop_assert!(cs.invariant_holds());
        }

        #[test]
        fn deterministic_and_case_insensitive(q in "[a-z ]{0,40}", city in prop::sample::select(vec!["derby", "maize", "park city", "wichita", "sedgwick"])) {
            let g = gaz();
            let lower = format!("{q} {city}");
            let upper = format!("{q} {}", city.to_uppercase());
            let a = extract_constraints(&lower, &g);
            prop_assert_eq!(&a, &extract_constraints(&lower, &g));
            prop_assert_eq!(a.city, extract_constraints(&upper, &g).city);
        }

        #[test]
        fn county_suffix_never_sets_that_city(prefix in "[a-z ]{0,20}", name in prop::sample::select(vec!["Sedgwick", "Wichita", "Ottawa", "Russell", "Marion", "Shawnee"])) {
            let cs = extract_constraints(&format!("{prefix} {name} County"), &gaz());
            prop_assert_eq!(cs.county.as_deref(), Some(name));
            prop_assert!(cs.city.as_deref() != Some(name));
        }
    }
}
