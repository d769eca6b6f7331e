use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Utc};

use crate::model::PantryRecord;
use crate::vector::{build_index, EmbeddingProvider, IndexError, VectorIndex};

/// An immutable dataset + index pair. Reindexing builds a new corpus rather
/// than mutating this one.
pub struct PantryCorpus {
    records: Vec<PantryRecord>,
    by_id: HashMap<String, usize>,
    index: VectorIndex,
    provider: Arc<dyn EmbeddingProvider>,
    snapshot_at: Option<DateTime<Utc>>,
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("index fingerprint `{index}` does not match provider `{provider}`")]
    ProviderMismatch { index: String, provider: String },
    #[error("index and dataset disagree: {0}")]
    Inconsistent(String),
    #[error(transparent)]
    Index(#[from] IndexError),
}

impl PantryCorpus {
    pub fn build(records: Vec<PantryRecord>, provider: Arc<dyn EmbeddingProvider>) -> Result<Self, CorpusError> {
        let index = build_index(&records, provider.as_ref())?;
        Self::with_index(records, index, provider)
    }

    /// Pairs a dataset with a previously built index, checking they match.
    pub fn with_index(
        records: Vec<PantryRecord>,
        index: VectorIndex,
        provider: Arc<dyn EmbeddingProvider>,
    ) -> Result<Self, CorpusError> {
        if index.fingerprint() != provider.fingerprint() || index.dim() != provider.dim() {
            return Err(CorpusError::ProviderMismatch {
                index: index.fingerprint().to_string(),
                provider: provider.fingerprint(),
            });
        }
        let by_id: HashMap<String, usize> = records.iter().enumerate().map(|(i, r)| (r.id.clone(), i)).collect();
        if by_id.len() != records.len() {
            return Err(CorpusError::Inconsistent("duplicate record ids".into()));
        }
        if index.len() != records.len() || index.ids().iter().any(|id| !by_id.contains_key(id)) {
            return Err(CorpusError::Inconsistent(format!(
                "index has {} entries for {} records",
                index.len(),
                records.len()
            )));
        }
        let snapshot_at = crate::dataset::snapshot_time(&records);
        Ok(PantryCorpus { records, by_id, index, provider, snapshot_at })
    }

    pub fn records(&self) -> &[PantryRecord] {
        &self.records
    }

    pub fn get(&self, id: &str) -> Option<&PantryRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    pub fn index(&self) -> &VectorIndex {
        &self.index
    }

    pub fn provider(&self) -> &dyn EmbeddingProvider {
        self.provider.as_ref()
    }

    pub fn snapshot_at(&self) -> Option<DateTime<Utc>> {
        self.snapshot_at
    }
}
