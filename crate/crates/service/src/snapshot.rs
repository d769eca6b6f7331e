use std::path::Path;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use pantry_core::corpus::{CorpusError, PantryCorpus};
use pantry_core::dataset::{load_dataset, DatasetError};
use pantry_core::vector::{build_index, index_to_bytes, load_index, save_index, EmbeddingProvider, IndexError};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

/// One consistent dataset + index pair.
pub struct Snapshot {
    pub corpus: PantryCorpus,
    /// SHA-256 of the serialized index.
    pub fingerprint: String,
    pub loaded_at: DateTime<Utc>,
}

/// With `rebuild` false an existing index file is reused when it matches the
/// dataset; otherwise the index is rebuilt (and written back when a path is
/// configured).
pub fn load_snapshot(
    data_path: &Path,
    index_path: Option<&Path>,
    provider: Arc<dyn EmbeddingProvider>,
    rebuild: bool,
) -> Result<Snapshot, SnapshotError> {
    let records = load_dataset(data_path)?;
    let existing = match index_path {
        Some(p) if !rebuild && p.exists() => Some(load_index(p)?),
        _ => None,
    };
    let corpus = match existing {
        Some(index) => match PantryCorpus::with_index(records.clone(), index, provider.clone()) {
            Ok(c) => c,
            Err(e) => {
                log::warn!("index file does not match dataset ({e}); rebuilding");
                rebuild_corpus(records, index_path, provider)?
            }
        },
        None => rebuild_corpus(records, index_path, provider)?,
    };
    let fingerprint = format!("{:x}", Sha256::digest(index_to_bytes(corpus.index())));
    Ok(Snapshot { corpus, fingerprint, loaded_at: Utc::now() })
}

fn rebuild_corpus(
    records: Vec<pantry_core::PantryRecord>,
    index_path: Option<&Path>,
    provider: Arc<dyn EmbeddingProvider>,
) -> Result<PantryCorpus, SnapshotError> {
    let index = build_index(&records, provider.as_ref())?;
    if let Some(p) = index_path {
        // write beside the target and rename so readers never see a partial file
        let tmp = p.with_extension("tmp");
        save_index(&index, &tmp)?;
        std::fs::rename(&tmp, p).map_err(|e| IndexError::Io(format!("{}: {e}", p.display())))?;
    }
    Ok(PantryCorpus::with_index(records, index, provider)?)
}
