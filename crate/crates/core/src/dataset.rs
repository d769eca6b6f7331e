//! Canonical dataset file: a JSON array of pantry records.

use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use thiserror::Error;

use crate::model::PantryRecord;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("reading {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed dataset {path}: {source}")]
    Malformed {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

pub fn load_dataset(path: &Path) -> Result<Vec<PantryRecord>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|source| DatasetError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| DatasetError::Malformed {
        path: path.to_path_buf(),
        source,
    })
}

pub fn to_json(records: &[PantryRecord]) -> String {
    let mut s = serde_json::to_string_pretty(records).expect("records serialize");
    s.push('\n');
    s
}

pub fn save_dataset(path: &Path, records: &[PantryRecord]) -> Result<(), DatasetError> {
    std::fs::write(path, to_json(records)).map_err(|source| DatasetError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// Latest capture time in the dataset, reported alongside served records.
pub fn snapshot_time(records: &[PantryRecord]) -> Option<DateTime<Utc>> {
    records.iter().map(|r| r.scraped_at).max()
}
