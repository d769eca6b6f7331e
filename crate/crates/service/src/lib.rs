//! JSON-over-HTTP front end for the pantry assistant.
//!
//! The dataset and index live in an immutable [`Snapshot`] that reindexing
//! replaces wholesale; the session store is the only shared mutable state.

mod api;
mod snapshot;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};

use axum::http::HeaderValue;
use axum::Router;
use pantry_core::assistant::{Assistant, SessionStore};
use pantry_core::vector::EmbeddingProvider;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

pub use api::{PantryView, QueryRequest};
pub use snapshot::{load_snapshot, Snapshot, SnapshotError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_path: PathBuf,
    /// Index file to load at startup and rewrite on reindex. Without one the
    /// index is built in memory.
    pub index_path: Option<PathBuf>,
    /// Allowed browser origins; `*` allows any.
    pub cors_origins: Vec<String>,
}

pub struct AppState {
    config: ServiceConfig,
    assistant: Assistant,
    provider: Arc<dyn EmbeddingProvider>,
    sessions: SessionStore,
    snapshot: RwLock<Option<Arc<Snapshot>>>,
    reindexing: Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig, assistant: Assistant, provider: Arc<dyn EmbeddingProvider>) -> Self {
        AppState {
            config,
            assistant,
            provider,
            sessions: SessionStore::default(),
            snapshot: RwLock::new(None),
            reindexing: Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Option<Arc<Snapshot>> {
        self.snapshot.read().unwrap().clone()
    }

    pub fn install(&self, snapshot: Snapshot) -> Arc<Snapshot> {
        let snap = Arc::new(snapshot);
        *self.snapshot.write().unwrap() = Some(snap.clone());
        snap
    }

    /// Loads the configured dataset and index and installs them.
    pub fn load(&self) -> Result<Arc<Snapshot>, SnapshotError> {
        let snap = load_snapshot(&self.config.data_path, self.config.index_path.as_deref(), self.provider.clone(), false)?;
        Ok(self.install(snap))
    }

    /// Rebuilds the index from the dataset file and swaps it in.
    pub fn reindex(&self) -> Result<Arc<Snapshot>, SnapshotError> {
        let _one_at_a_time = self.reindexing.lock().unwrap();
        let snap = load_snapshot(&self.config.data_path, self.config.index_path.as_deref(), self.provider.clone(), true)?;
        Ok(self.install(snap))
    }

    pub fn sessions(&self) -> &SessionStore {
        &self.sessions
    }
}

fn cors(origins: &[String]) -> CorsLayer {
    let layer = CorsLayer::new().allow_methods(Any).allow_headers(Any);
    if origins.is_empty() || origins.iter().any(|o| o == "*") {
        return layer.allow_origin(Any);
    }
    let list: Vec<HeaderValue> = origins.iter().filter_map(|o| HeaderValue::from_str(o).ok()).collect();
    layer.allow_origin(AllowOrigin::list(list))
}

pub fn router(state: Arc<AppState>) -> Router {
    let cors = cors(&state.config.cors_origins);
    api::routes().layer(cors).with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
