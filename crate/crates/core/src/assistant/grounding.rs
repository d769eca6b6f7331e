//! Post-hoc check that a response names only retrieved pantries.

use std::collections::HashSet;
use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use crate::model::PantryRecord;

/// Capitalized phrases ending in an organization word, e.g. "Sunrise Hope Pantry".
static ORG_PHRASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"\b(?:[A-Z][\w'’.&-]*[ \t]+)+(?:Pantry|Food Bank|Mission|Ministries)\b").expect("org regex")
});

/// Capitalized words that can precede a real name without being part of it.
const LEAD_INS: &[&str] = &[
    "a", "an", "the", "try", "visit", "at", "contact", "call", "see", "also", "or", "and", "both", "near", "here",
    "there", "then", "from", "by", "for", "with", "nearest", "recommended",
];

/// Byte ranges of whole-phrase, ASCII-case-insensitive occurrences.
pub fn phrase_occurrences(text: &str, phrase: &str) -> Vec<Range<usize>> {
    let phrase = phrase.trim();
    if phrase.is_empty() {
        return Vec::new();
    }
    let hay = text.to_ascii_lowercase();
    let needle = phrase.to_ascii_lowercase();
    let is_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric());
    let mut out = Vec::new();
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let start = from + pos;
        let end = start + needle.len();
        let before = hay[..start].chars().next_back();
        let after = hay[end..].chars().next();
        if !is_word(before) && !is_word(after) {
            out.push(start..end);
        }
        from = start + needle.chars().next().map_or(1, char::len_utf8);
    }
    out
}

pub fn mentions(text: &str, phrase: &str) -> bool {
    !phrase_occurrences(text, phrase).is_empty()
}

fn covered(span: &Range<usize>, by: &[Range<usize>]) -> bool {
    by.iter().any(|o| o.start <= span.start && span.end <= o.end)
}

/// Violations: dataset pantries named but not retrieved, and pantry-like
/// names that exist nowhere in the dataset.
pub fn verify_grounding(response_text: &str, retrieved: &[&PantryRecord], dataset: &[PantryRecord]) -> Vec<String> {
    let retrieved_names: HashSet<String> = retrieved.iter().map(|r| r.name.to_ascii_lowercase()).collect();
    let mut names: Vec<&str> = dataset.iter().map(|r| r.name.as_str()).collect();
    names.sort_by_key(|n| std::cmp::Reverse(n.len()));
    names.dedup_by(|a, b| a.eq_ignore_ascii_case(b));

    let retrieved_spans: Vec<Range<usize>> = retrieved
        .iter()
        .flat_map(|r| phrase_occurrences(response_text, &r.name))
        .collect();
    let mut known_spans: Vec<Range<usize>> = Vec::new();
    let mut violations = Vec::new();

    for name in &names {
        let spans = phrase_occurrences(response_text, name);
        if spans.is_empty() {
            continue;
        }
        let retrieved_here = retrieved_names.contains(&name.to_ascii_lowercase());
        if !retrieved_here && spans.iter().any(|s| !covered(s, &retrieved_spans)) {
            violations.push(format!("names pantry outside the retrieved set: {name}"));
        }
        known_spans.extend(spans);
    }

    let dataset_names: HashSet<String> = names.iter().map(|n| n.to_ascii_lowercase()).collect();
    for m in ORG_PHRASE.find_iter(response_text) {
        if covered(&m.range(), &known_spans) {
            continue;
        }
        let words: Vec<&str> = m.as_str().split_whitespace().collect();
        let skip = words
            .iter()
            .take_while(|w| LEAD_INS.contains(&w.to_ascii_lowercase().as_str()))
            .count();
        let candidate = words[skip..].join(" ");
        if words.len() - skip < 2 || dataset_names.contains(&candidate.to_ascii_lowercase()) {
            continue;
        }
        let v = format!("names a pantry absent from the dataset: {candidate}");
        if !violations.contains(&v) {
            violations.push(v);
        }
    }
    violations
}
