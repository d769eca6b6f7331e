//! Conservative grammar for free-text opening hours.
//!
//! ```text
//! schedule  := phrase ((';' | ',') phrase)*
//! phrase    := dayspec timerange
//! dayspec   := day | day ('-' | 'to') day
//! timerange := time ('-' | 'to') time
//! time      := H[:MM] ('am' | 'pm') | 'noon'
//! ```
//!
//! Anything outside the grammar (monthly patterns, "call for hours",
//! `midnight`, overnight ranges, overlapping phrases) yields an unparsed
//! schedule with no intervals. Hours are never guessed.

use std::sync::LazyLock;

use regex::Regex;

use crate::model::{Day, OpenInterval, ParseStatus, WeeklySchedule};

const TIME: &str = r"(?:\d{1,2}(?::\d{2})?\s*(?:am|pm|a\.m\.|p\.m\.)|noon)";
const DASH: &str = r"(?:-|–|—|\bto\b)";

static PHRASE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(&format!(
        r"^(?P<d1>[a-z]+\.?)(?:\s*{DASH}\s*(?P<d2>[a-z]+\.?))?\s+(?P<t1>{TIME})\s*{DASH}\s*(?P<t2>{TIME})$"
    ))
    .expect("phrase regex")
});

static CLOCK: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^(?P<h>\d{1,2})(?::(?P<m>\d{2}))?\s*(?P<ampm>am|pm|a\.m\.|p\.m\.)$").expect("clock regex")
});

pub fn parse_hours(text: &str) -> WeeklySchedule {
    match parse_intervals(text) {
        Some(intervals) => WeeklySchedule {
            intervals,
            parse_status: ParseStatus::Parsed,
        },
        None => WeeklySchedule::unparsed(),
    }
}

fn parse_intervals(text: &str) -> Option<Vec<OpenInterval>> {
    let lowered = text.to_lowercase();
    let mut intervals: Vec<OpenInterval> = Vec::new();
    for phrase in lowered.split([';', ',']) {
        let phrase = collapse_ws(phrase);
        if phrase.is_empty() {
            continue;
        }
        intervals.extend(parse_phrase(&phrase)?);
    }
    if intervals.is_empty() {
        return None;
    }
    for (i, a) in intervals.iter().enumerate() {
        for b in &intervals[i + 1..] {
            if a.day == b.day && a.open_min < b.close_min && b.open_min < a.close_min {
                return None;
            }
        }
    }
    intervals.sort_by_key(|iv| (iv.day, iv.open_min));
    Some(intervals)
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn parse_phrase(phrase: &str) -> Option<Vec<OpenInterval>> {
    let caps = PHRASE.captures(phrase)?;
    let first = Day::parse_token(&caps["d1"])?;
    let last = match caps.name("d2") {
        Some(d) => Day::parse_token(d.as_str())?,
        None => first,
    };
    // wrap-around ranges like "Fri-Mon" are not accepted
    if last < first {
        return None;
    }
    let open = parse_time(&caps["t1"])?;
    let close = parse_time(&caps["t2"])?;
    if open >= close {
        return None;
    }
    Some(
        (first.index()..=last.index())
            .filter_map(Day::from_index)
            .map(|day| OpenInterval {
                day,
                open_min: open,
                close_min: close,
            })
            .collect(),
    )
}

fn parse_time(t: &str) -> Option<u16> {
    let t = t.trim();
    if t == "noon" {
        return Some(12 * 60);
    }
    let caps = CLOCK.captures(t)?;
    let hour: u16 = caps["h"].parse().ok()?;
    let minute: u16 = match caps.name("m") {
        Some(m) => m.as_str().parse().ok()?,
        None => 0,
    };
    if !(1..=12).contains(&hour) || minute > 59 {
        return None;
    }
    let pm = caps["ampm"].starts_with('p');
    let hour24 = match (hour, pm) {
        (12, false) => 0,
        (12, true) => 12,
        (h, false) => h,
        (h, true) => h + 12,
    };
    Some(hour24 * 60 + minute)
}
