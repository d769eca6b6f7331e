//! Prompt assembly and the record-block wire format shared with the stub
//! generator.

use crate::model::{FlagSet, HitFlag, IdRequirement, PantryRecord};

pub const SYSTEM_PROMPT: &str = "You are a food pantry assistant for Kansas. \
Answer only from the pantry records provided in the user message. \
If no record matches the request, say that you could not find a matching pantry and do not suggest substitutes. \
Never invent pantries, addresses, hours, phone numbers or eligibility rules. \
For every pantry you recommend, give its name, address and hours. \
If a record's hours or ID requirement is unknown, say so and suggest calling ahead.";

pub const NO_MATCH_MARKER: &str = "NO MATCHING RECORDS";
pub const CORRECTIVE_INSTRUCTION: &str = "Your previous answer mentioned pantries that are not in the provided records. \
Rewrite the answer using only the pantries listed in the records above, by their exact names.";

const BLOCK_END: &str = "[end record]";

/// A retrieved record together with its retrieval flags.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRecord<'a> {
    pub record: &'a PantryRecord,
    pub flags: FlagSet,
}

pub fn hours_line(record: &PantryRecord) -> String {
    match record.hours.display() {
        Some(s) => s,
        None if record.hours_raw.trim().is_empty() => "unknown".to_string(),
        None => format!("unknown (listing says: {})", record.hours_raw.trim()),
    }
}

pub fn id_line(record: &PantryRecord, flags: &FlagSet) -> &'static str {
    if flags.contains(&HitFlag::UnknownEligibility) {
        IdRequirement::Unknown.label()
    } else {
        record.id_requirement.label()
    }
}

fn contact_line(record: &PantryRecord) -> Option<String> {
    let c = &record.contact;
    let parts: Vec<String> = [("phone", &c.phone), ("email", &c.email), ("website", &c.website)]
        .into_iter()
        .filter_map(|(k, v)| v.as_ref().map(|v| format!("{k} {v}")))
        .collect();
    (!parts.is_empty()).then(|| parts.join("; "))
}

fn record_block(n: usize, hit: &PromptRecord<'_>) -> String {
    let r = hit.record;
    let mut lines = vec![
        format!("[record {n}]"),
        format!("Name: {}", r.name),
        format!("Address: {}", r.street_address),
        format!("City: {}", r.city),
        format!("County: {}", if r.county.is_empty() { "unknown" } else { &r.county }),
        format!("ZIP: {}", r.zip),
        format!("Hours: {}", hours_line(r)),
        format!("ID requirement: {}", id_line(r, &hit.flags)),
    ];
    if let Some(c) = contact_line(r) {
        lines.push(format!("Contact: {c}"));
    }
    if !hit.flags.is_empty() {
        let flags: Vec<&str> = hit
            .flags
            .iter()
            .map(|f| match f {
                HitFlag::UnknownEligibility => "ID policy not listed",
                HitFlag::UnknownHours => "hours not listed",
            })
            .collect();
        lines.push(format!("Caution: {}", flags.join(", ")));
    }
    lines.push(BLOCK_END.to_string());
    lines.join("\n")
}

/// Returns `(system_prompt, user_message)`.
pub fn build_prompt(query: &str, hits: &[PromptRecord<'_>]) -> (String, String) {
    let mut user = format!("Question: {}\n\nRecords:\n", query.trim());
    if hits.is_empty() {
        user.push_str(NO_MATCH_MARKER);
        user.push('\n');
    } else {
        let blocks: Vec<String> = hits.iter().enumerate().map(|(i, h)| record_block(i + 1, h)).collect();
        user.push_str(&blocks.join("\n\n"));
        user.push('\n');
    }
    (SYSTEM_PROMPT.to_string(), user)
}

/// Fields recovered from one record block.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParsedBlock {
    pub name: String,
    pub address: String,
    pub city: String,
    pub hours: String,
    pub id_requirement: String,
}

/// Parses record blocks back out of a user message. `Ok(vec![])` for the
/// explicit no-match marker; `Err` when the message follows neither form.
pub fn parse_record_blocks(user_message: &str) -> Result<Vec<ParsedBlock>, String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<(String, String)>> = None;
    for line in user_message.lines() {
        let line = line.trim();
        if line.starts_with("[record ") && line.ends_with(']') {
            if current.is_some() {
                return Err("record block not terminated".into());
            }
            current = Some(Vec::new());
        } else if line == BLOCK_END {
            let fields = current.take().ok_or("stray end-of-record line")?;
            let get = |k: &str| {
                fields
                    .iter()
                    .find(|(key, _)| key == k)
                    .map(|(_, v)| v.clone())
                    .ok_or_else(|| format!("record block missing `{k}`"))
            };
            blocks.push(ParsedBlock {
                name: get("Name")?,
                address: get("Address")?,
                city: get("City")?,
                hours: get("Hours")?,
                id_requirement: get("ID requirement")?,
            });
        } else if let Some(fields) = current.as_mut() {
            if let Some((k, v)) = line.split_once(": ") {
                fields.push((k.to_string(), v.to_string()));
            }
        }
    }
    if current.is_some() {
        return Err("record block not terminated".into());
    }
    if blocks.is_empty() && !user_message.contains(NO_MATCH_MARKER) {
        return Err("no record blocks and no no-match marker".into());
    }
    Ok(blocks)
}
