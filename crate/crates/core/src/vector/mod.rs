//! Record embedding and exact cosine search.

pub mod document;
pub mod embed;
pub mod index;
pub mod persist;

use thiserror::Error;

pub use document::record_to_document;
pub use embed::{stub_embed, EmbeddingProvider, ProviderError, RemoteEmbedder, StubEmbedder, STUB_DIM};
pub use index::{build_index, VectorIndex};
pub use persist::{index_from_bytes, index_to_bytes, load_index, save_index};

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("query has dimension {got}, index expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("duplicate pantry id `{0}` in index")]
    DuplicateId(String),
    #[error("non-finite vector component for `{0}`")]
    NonFinite(String),
    #[error("embedding record `{id}`: {source}")]
    Provider {
        id: String,
        #[source]
        source: ProviderError,
    },
    #[error("corrupt index file: {0}")]
    CorruptIndex(String),
    #[error("index file io: {0}")]
    Io(String),
}
