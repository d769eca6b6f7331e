use std::collections::HashSet;
use std::sync::LazyLock;

use regex::Regex;

use super::hours::parse_hours;
use super::html::RawRecord;
use super::IngestError;
use crate::gazetteer::Gazetteer;
use crate::model::{Contact, IdRequirement, PantryRecord};

const ADDRESS_LABELS: &[&str] = &["address", "street address", "location"];
const CITY_LABELS: &[&str] = &["city", "town"];
const COUNTY_LABELS: &[&str] = &["county"];
const STATE_LABELS: &[&str] = &["state"];
const ZIP_LABELS: &[&str] = &["zip", "zip code", "zipcode", "postal code"];
const PHONE_LABELS: &[&str] = &["phone", "telephone", "phone number"];
const EMAIL_LABELS: &[&str] = &["email", "e-mail"];
const WEBSITE_LABELS: &[&str] = &["website", "web", "url"];
const HOURS_LABELS: &[&str] = &["hours", "hours of operation", "distribution hours", "open hours"];
const ELIGIBILITY_LABELS: &[&str] = &[
    "eligibility",
    "eligibility requirements",
    "requirements",
    "what to bring",
];
const NOTES_LABELS: &[&str] = &["notes", "other notes", "additional information", "additional info"];

static ADDRESS_TAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r"(?s)^(?P<street>.+?)\s*[,\n]\s*(?P<city>[A-Za-z][A-Za-z .'-]*?)\s*,?\s+(?P<state>[A-Za-z]{2})\.?\s+(?P<zip>\d{5})(?:-\d{4})?\s*$",
    )
    .expect("address regex")
});

static ZIP_FIELD: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\d{5})(?:-\d{4})?$").expect("zip regex"));

static ID_NOT_REQUIRED: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"\bno (?:photo )?(?:id|identification)\b",
        r"\b(?:photo )?(?:id|identification) (?:is )?not (?:required|needed)\b",
        r"\bwithout (?:an? |any )?(?:photo )?(?:id|identification)\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("id pattern"))
    .collect()
});

static ID_REQUIRED: LazyLock<Vec<Regex>> = LazyLock::new(|| {
    [
        r"\b(?:photo )?(?:id|identification) (?:is )?required\b",
        r"\brequires? (?:a |an )?(?:photo )?(?:id|identification)\b",
        r"\bmust (?:bring|show|present) (?:a |an |your )?(?:photo )?(?:id|identification)\b",
    ]
    .iter()
    .map(|p| Regex::new(p).expect("id pattern"))
    .collect()
});

fn first<'a>(raw: &'a RawRecord, labels: &[&str]) -> Option<&'a str> {
    labels.iter().find_map(|l| raw.get(l))
}

fn one_line(s: &str, sep: &str) -> String {
    s.lines().map(str::trim).filter(|l| !l.is_empty()).collect::<Vec<_>>().join(sep)
}

pub fn slugify(name: &str) -> String {
    let mut out = String::new();
    for c in name.chars().flat_map(char::to_lowercase) {
        if c.is_ascii_alphanumeric() {
            out.push(c);
        } else if c == '\'' || c == '’' {
            continue;
        } else if !out.ends_with('-') && !out.is_empty() {
            out.push('-');
        }
    }
    let trimmed = out.trim_end_matches('-').to_string();
    if trimmed.is_empty() {
        "pantry".to_string()
    } else {
        trimmed
    }
}

pub fn base_id(name: &str, zip: &str) -> String {
    let slug = slugify(name);
    if zip.is_empty() {
        slug
    } else {
        format!("{slug}-{}", slugify(zip))
    }
}

/// Classifies free-text eligibility. Negated phrasings are checked first so
/// that "no ID required" is never read as "ID required".
pub fn classify_id_requirement(text: &str) -> IdRequirement {
    let folded = text.to_lowercase().split_whitespace().collect::<Vec<_>>().join(" ");
    if folded.is_empty() {
        IdRequirement::Unknown
    } else if ID_NOT_REQUIRED.iter().any(|re| re.is_match(&folded)) {
        IdRequirement::NotRequired
    } else if ID_REQUIRED.iter().any(|re| re.is_match(&folded)) {
        IdRequirement::Required
    } else {
        IdRequirement::Unknown
    }
}

fn normalize_state(raw: &str) -> String {
    let t = raw.trim().trim_end_matches('.');
    if t.eq_ignore_ascii_case("kansas") {
        "KS".to_string()
    } else {
        t.to_ascii_uppercase()
    }
}

/// Normalizes one raw record. The id is the base slug; collision suffixes
/// are assigned by [`normalize_all`].
pub fn normalize_record(raw: &RawRecord, gaz: &Gazetteer) -> Result<PantryRecord, IngestError> {
    let name = raw
        .name()
        .map(|n| n.split_whitespace().collect::<Vec<_>>().join(" "))
        .ok_or_else(|| IngestError::ParseFailure {
            source_url: raw.source_url.clone(),
            reason: "no name field".into(),
        })?;

    let mut street = first(raw, ADDRESS_LABELS).unwrap_or("").to_string();
    let mut city = first(raw, CITY_LABELS).map(str::to_string);
    let mut state = first(raw, STATE_LABELS).map(normalize_state);
    let mut zip = first(raw, ZIP_LABELS).map(|z| {
        let z = z.trim();
        ZIP_FIELD
            .captures(z)
            .map(|c| c[1].to_string())
            .unwrap_or_else(|| z.to_string())
    });

    if let Some(caps) = ADDRESS_TAIL.captures(&street) {
        city.get_or_insert_with(|| caps["city"].trim().to_string());
        state.get_or_insert_with(|| normalize_state(&caps["state"]));
        zip.get_or_insert_with(|| caps["zip"].to_string());
        street = caps["street"].to_string();
    }
    let street = one_line(&street, ", ");

    let city = city.map(|c| one_line(&c, " ")).filter(|c| !c.is_empty());
    let zip = zip.filter(|z| !z.is_empty());
    if city.is_none() && zip.is_none() {
        return Err(IngestError::NormalizeFailure {
            name,
            reason: "both city and zip are missing".into(),
        });
    }
    let city = city
        .map(|c| gaz.city(&c).map(str::to_string).unwrap_or(c))
        .unwrap_or_default();
    let zip = zip.unwrap_or_default();

    let county = first(raw, COUNTY_LABELS)
        .and_then(|c| gaz.county(c))
        .or_else(|| gaz.county_for_city(&city))
        .unwrap_or("")
        .to_string();

    let hours_raw = first(raw, HOURS_LABELS).map(|h| one_line(h, "; ")).unwrap_or_default();
    let eligibility_notes = first(raw, ELIGIBILITY_LABELS).map(|e| one_line(e, " ")).unwrap_or_default();

    let contact = Contact {
        phone: first(raw, PHONE_LABELS).map(|s| one_line(s, " ")),
        email: first(raw, EMAIL_LABELS).map(|s| one_line(s, " ")),
        website: first(raw, WEBSITE_LABELS).map(|s| one_line(s, " ")),
    };

    Ok(PantryRecord {
        id: base_id(&name, &zip),
        hours: parse_hours(&hours_raw),
        hours_raw,
        id_requirement: classify_id_requirement(&eligibility_notes),
        eligibility_notes,
        notes: first(raw, NOTES_LABELS).map(|n| one_line(n, " ")).unwrap_or_default(),
        name,
        street_address: street,
        city,
        county,
        state: state.unwrap_or_else(|| gaz.state().to_string()),
        zip,
        contact,
        source_url: raw.source_url.clone(),
        scraped_at: raw.fetched_at,
    })
}

/// Normalizes a batch in input order. Records sharing a base id receive
/// `-2`, `-3`, ... suffixes. Failures are returned alongside the records.
pub fn normalize_all(raws: &[RawRecord], gaz: &Gazetteer) -> (Vec<PantryRecord>, Vec<IngestError>) {
    let mut used: HashSet<String> = HashSet::new();
    let mut records = Vec::new();
    let mut errors = Vec::new();
    for raw in raws {
        match normalize_record(raw, gaz) {
            Ok(mut rec) => {
                if used.contains(&rec.id) {
                    let base = rec.id.clone();
                    let mut n = 2;
                    while used.contains(&format!("{base}-{n}")) {
                        n += 1;
                    }
                    rec.id = format!("{base}-{n}");
                }
                used.insert(rec.id.clone());
                records.push(rec);
            }
            Err(e) => errors.push(e),
        }
    }
    (records, errors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ParseStatus;
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn raw(pairs: &[(&str, &str)]) -> RawRecord {
        RawRecord {
            fields: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect::<BTreeMap<_, _>>(),
            source_url: "https://example.org/p".into(),
            fetched_at: Utc.with_ymd_and_hms(2026, 1, 31, 0, 0, 0).unwrap(),
        }
    }

    #[test]
    fn county_resolved_from_gazetteer() {
        let g = Gazetteer::kansas();
        let r = normalize_record(&raw(&[("name", "Hope Pantry"), ("city", "Derby"), ("zip", "67037")]), &g).unwrap();
        assert_eq!(r.county, "Sedgwick");
        assert_eq!(r.id, "hope-pantry-67037");
        assert_eq!(r.state, "KS");
    }

    #[test]
    fn source_county_wins_when_valid() {
        let g = Gazetteer::kansas();
        let r = normalize_record(
            &raw(&[("name", "X"), ("city", "Derby"), ("county", "Butler County"), ("zip", "67037")]),
            &g,
        )
        .unwrap();
        assert_eq!(r.county, "Butler");
        let r = normalize_record(
            &raw(&[("name", "X"), ("city", "Derby"), ("county", "Atlantis"), ("zip", "67037")]),
            &g,
        )
        .unwrap();
        assert_eq!(r.county, "Sedgwick");
    }

    #[test]
    fn unknown_city_leaves_county_empty() {
        let g = Gazetteer::kansas();
        let r = normalize_record(&raw(&[("name", "X"), ("city", "Schulte"), ("zip", "67052")]), &g).unwrap();
        assert_eq!(r.county, "");
    }

    #[test]
    fn eligibility_patterns() {
        assert_eq!(classify_id_requirement("Photo ID required for first visit"), IdRequirement::Required);
        assert_eq!(classify_id_requirement(""), IdRequirement::Unknown);
        assert_eq!(classify_id_requirement("No ID needed"), IdRequirement::NotRequired);
        assert_eq!(classify_id_requirement("No identification necessary"), IdRequirement::NotRequired);
        assert_eq!(classify_id_requirement("ID not required"), IdRequirement::NotRequired);
        assert_eq!(classify_id_requirement("No ID required"), IdRequirement::NotRequired);
        assert_eq!(classify_id_requirement("Please bring proof of address"), IdRequirement::Unknown);
        assert_eq!(classify_id_requirement("Must show photo ID"), IdRequirement::Required);
    }

    #[test]
    fn missing_city_and_zip_fails() {
        let g = Gazetteer::kansas();
        let err = normalize_record(&raw(&[("name", "X"), ("address", "1 Main St")]), &g).unwrap_err();
        assert!(matches!(err, IngestError::NormalizeFailure { .. }));
    }

    #[test]
    fn combined_address_line_is_split() {
        let g = Gazetteer::kansas();
        let r = normalize_record(&raw(&[("name", "X"), ("address", "2525 E 21st St N\nWichita, KS 67214-1234")]), &g)
            .unwrap();
        assert_eq!(r.street_address, "2525 E 21st St N");
        assert_eq!(r.city, "Wichita");
        assert_eq!(r.zip, "67214");
        assert_eq!(r.county, "Sedgwick");
    }

    #[test]
    fn no_hours_means_unparsed() {
        let g = Gazetteer::kansas();
        let r = normalize_record(&raw(&[("name", "X"), ("city", "Derby")]), &g).unwrap();
        assert_eq!(r.hours.parse_status, ParseStatus::Unparsed);
        assert!(r.hours.intervals.is_empty());
        assert_eq!(r.id, "x");
    }

    #[test]
    fn multi_line_hours_join_as_phrases() {
        let g = Gazetteer::kansas();
        let r = normalize_record(&raw(&[("name", "X"), ("city", "Derby"), ("hours", "Mon 9am-12pm\nWed 1pm-3pm")]), &g)
            .unwrap();
        assert_eq!(r.hours_raw, "Mon 9am-12pm; Wed 1pm-3pm");
        assert_eq!(r.hours.intervals.len(), 2);
    }

    #[test]
    fn slugs() {
        assert_eq!(slugify("St. Mark's Food Pantry"), "st-marks-food-pantry");
        assert_eq!(slugify("  --  "), "pantry");
        assert_eq!(slugify("Café Ñ"), "caf");
    }

    proptest! {
        #[test]
        fn identical_names_get_distinct_ids(n in 1usize..12, name in "[A-Za-z ]{1,12}") {
            let g = Gazetteer::kansas();
            let raws: Vec<_> = (0..n).map(|_| raw(&[("name", name.as_str()), ("zip", "67214")])).collect();
            let (records, errors) = normalize_all(&raws, &g);
            prop_assert!(errors.is_empty());
            let ids: HashSet<_> = records.iter().map(|r| r.id.clone()).collect();
            prop_assert_eq!(ids.len(), n);
        }

        #[test]
        fn normalization_is_deterministic(city in "[A-Za-z ]{0,10}", elig in ".{0,30}", hours in ".{0,30}") {
            let g = Gazetteer::kansas();
            let r = raw(&[("name", "Hope Pantry"), ("city", city.as_str()), ("zip", "67037"),
                          ("eligibility", elig.as_str()), ("hours", hours.as_str())]);
            prop_assert_eq!(normalize_record(&r, &g).ok(), normalize_record(&r, &g).ok());
        }

        #[test]
        fn valid_source_county_never_overridden(county_idx in 0usize..105, city in prop::sample::select(vec!["Derby", "Topeka", "Sedgwick", "Nowhere"])) {
            let g = Gazetteer::kansas();
            let counties: Vec<_> = g.counties().into_iter().map(str::to_string).collect();
            let county = &counties[county_idx];
            let r = normalize_record(&raw(&[("name", "X"), ("city", city), ("county", county.as_str())]), &g).unwrap();
            prop_assert_eq!(&r.county, county);
        }
    }
}
