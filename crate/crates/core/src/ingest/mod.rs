//! Page parsing, record normalization and dataset auditing.

pub mod audit;
pub mod fetch;
pub mod hours;
pub mod html;
pub mod normalize;

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::gazetteer::Gazetteer;
use crate::model::PantryRecord;

pub use audit::{audit_dataset, AuditReport, DuplicatePair, DEFAULT_FRESHNESS_DAYS};
pub use fetch::{fetch_live, FetchOutcome, Fetcher, NetworkError};
pub use hours::parse_hours;
pub use html::{parse_pantry_page, PageParser, RawRecord, SourceProfile};
pub use normalize::{classify_id_requirement, normalize_all, normalize_record, slugify};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("could not parse {source_url}: {reason}")]
    ParseFailure { source_url: String, reason: String },
    #[error("could not normalize `{name}`: {reason}")]
    NormalizeFailure { name: String, reason: String },
    #[error("invalid source profile: {0}")]
    Profile(String),
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Default)]
pub struct IngestOutcome {
    pub records: Vec<PantryRecord>,
    pub errors: Vec<IngestError>,
}

/// Parses and normalizes every `*.html` file in `dir`, in file-name order.
/// Each page's source URL is its `<link rel="canonical">` when present,
/// otherwise a `file://` URL.
pub fn ingest_html_dir(
    dir: &Path,
    gaz: &Gazetteer,
    parser: &PageParser,
    fallback_fetched_at: DateTime<Utc>,
) -> Result<IngestOutcome, IngestError> {
    let io = |path: &Path, source| IngestError::Io { path: path.to_path_buf(), source };
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "html"))
        .collect();
    paths.sort();
    let mut pages = Vec::with_capacity(paths.len());
    for p in &paths {
        let html = std::fs::read_to_string(p).map_err(|e| io(p, e))?;
        let url = canonical_url(&html).unwrap_or_else(|| format!("file://{}", p.display()));
        pages.push((url, html));
    }
    Ok(ingest_pages(&pages, gaz, parser, fallback_fetched_at))
}

pub fn ingest_pages(
    pages: &[(String, String)],
    gaz: &Gazetteer,
    parser: &PageParser,
    fallback_fetched_at: DateTime<Utc>,
) -> IngestOutcome {
    let mut errors = Vec::new();
    let raws: Vec<RawRecord> = pages
        .iter()
        .filter_map(|(url, html)| match parser.parse(html, url, fallback_fetched_at) {
            Ok(r) => Some(r),
            Err(e) => {
                errors.push(e);
                None
            }
        })
        .collect();
    let (records, norm_errors) = normalize_all(&raws, gaz);
    errors.extend(norm_errors);
    IngestOutcome { records, errors }
}

fn canonical_url(html: &str) -> Option<String> {
    let doc = scraper::Html::parse_document(html);
    let sel = scraper::Selector::parse(r#"link[rel="canonical"]"#).ok()?;
    doc.select(&sel).next()?.value().attr("href").map(str::to_string)
}
