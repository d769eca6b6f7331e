//! Pantry detail page extraction.

use std::collections::BTreeMap;

use chrono::{DateTime, Utc};
use scraper::{ElementRef, Html, Selector};
use serde::{Deserialize, Serialize};
use url::Url;

use super::IngestError;

/// Where the fields live on a source's pages. The default profile matches the
/// bundled fixture pages:
///
/// ```html
/// <meta name="fetched-at" content="2026-01-31T14:02:00Z">
/// <h1 class="pantry-name">Hope Pantry</h1>
/// <dl class="pantry-details"><dt>City</dt><dd>Derby</dd> ...</dl>
/// ```
///
/// Listing pages link to detail pages with `<a class="pantry-link" href=...>`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceProfile {
    pub name_selector: String,
    pub label_selector: String,
    pub value_selector: String,
    pub fetched_at_meta: Option<String>,
    pub link_selector: String,
}

impl Default for SourceProfile {
    fn default() -> Self {
        SourceProfile {
            name_selector: "h1.pantry-name".into(),
            label_selector: "dl.pantry-details > dt".into(),
            value_selector: "dl.pantry-details > dd".into(),
            fetched_at_meta: Some("fetched-at".into()),
            link_selector: "a.pantry-link".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    /// Folded label (`address`, `hours`, ...) to trimmed text. Multi-line
    /// values keep one line per source line.
    pub fields: BTreeMap<String, String>,
    pub source_url: String,
    pub fetched_at: DateTime<Utc>,
}

impl RawRecord {
    pub fn get(&self, label: &str) -> Option<&str> {
        self.fields
            .get(label)
            .map(String::as_str)
            .filter(|v| !v.is_empty())
    }

    pub fn name(&self) -> Option<&str> {
        self.get("name")
    }
}

pub struct PageParser {
    profile: SourceProfile,
    name: Selector,
    label_or_value: Selector,
    value: Selector,
    link: Selector,
}

fn selector(s: &str) -> Result<Selector, IngestError> {
    Selector::parse(s).map_err(|e| IngestError::Profile(format!("selector `{s}`: {e}")))
}

fn fold_label(label: &str) -> String {
    label
        .trim()
        .trim_end_matches(':')
        .trim()
        .to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

fn element_text(el: ElementRef<'_>) -> String {
    let mut lines: Vec<String> = Vec::new();
    for chunk in el.text() {
        for line in chunk.lines() {
            let line = line.split_whitespace().collect::<Vec<_>>().join(" ");
            if !line.is_empty() {
                lines.push(line);
            }
        }
    }
    lines.join("\n")
}

impl PageParser {
    pub fn new(profile: SourceProfile) -> Result<Self, IngestError> {
        let combined = format!("{}, {}", profile.label_selector, profile.value_selector);
        Ok(PageParser {
            name: selector(&profile.name_selector)?,
            label_or_value: selector(&combined)?,
            value: selector(&profile.value_selector)?,
            link: selector(&profile.link_selector)?,
            profile,
        })
    }

    pub fn profile(&self) -> &SourceProfile {
        &self.profile
    }

    /// `fallback_fetched_at` is used when the page carries no capture time.
    pub fn parse(
        &self,
        html: &str,
        source_url: &str,
        fallback_fetched_at: DateTime<Utc>,
    ) -> Result<RawRecord, IngestError> {
        let doc = Html::parse_document(html);
        let name = doc
            .select(&self.name)
            .map(element_text)
            .find(|t| !t.is_empty())
            .ok_or_else(|| IngestError::ParseFailure {
                source_url: source_url.to_string(),
                reason: "no name field".into(),
            })?;

        let mut fields = BTreeMap::new();
        fields.insert("name".to_string(), name.replace('\n', " "));

        let mut label: Option<String> = None;
        for el in doc.select(&self.label_or_value) {
            if self.value.matches(&el) {
                if let Some(l) = label.as_ref() {
                    let text = element_text(el);
                    let entry: &mut String = fields.entry(l.clone()).or_default();
                    if !entry.is_empty() && !text.is_empty() {
                        entry.push('\n');
                    }
                    entry.push_str(&text);
                }
            } else {
                let l = fold_label(&element_text(el));
                label = (!l.is_empty() && l != "name").then_some(l);
            }
        }

        let fetched_at = self
            .profile
            .fetched_at_meta
            .as_deref()
            .and_then(|meta| {
                let sel = Selector::parse(&format!("meta[name=\"{meta}\"]")).ok()?;
                let content = doc.select(&sel).next()?.value().attr("content")?.to_string();
                DateTime::parse_from_rfc3339(content.trim()).ok()
            })
            .map(|t| t.with_timezone(&Utc))
            .unwrap_or(fallback_fetched_at);

        Ok(RawRecord {
            fields,
            source_url: source_url.to_string(),
            fetched_at,
        })
    }

    /// Absolute detail-page URLs linked from a listing page, in document order.
    pub fn extract_links(&self, html: &str, base_url: &str) -> Vec<String> {
        let doc = Html::parse_document(html);
        let base = Url::parse(base_url).ok();
        let mut out: Vec<String> = Vec::new();
        for a in doc.select(&self.link) {
            let Some(href) = a.value().attr("href") else { continue };
            let resolved = match &base {
                Some(b) => b.join(href).map(|u| u.to_string()).ok(),
                None => Url::parse(href).map(|u| u.to_string()).ok(),
            };
            if let Some(u) = resolved {
                if !out.contains(&u) {
                    out.push(u);
                }
            }
        }
        out
    }
}

impl Default for PageParser {
    fn default() -> Self {
        PageParser::new(SourceProfile::default()).expect("default profile selectors are valid")
    }
}

/// Parses with the default profile, stamping pages without a capture time
/// with the current time.
pub fn parse_pantry_page(html: &str, source_url: &str) -> Result<RawRecord, IngestError> {
    PageParser::default().parse(html, source_url, Utc::now())
}
