use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use pantry_core::assistant::GenerationPath;
use pantry_core::model::{ConstraintSet, Day, FilterStep, FlagSet, IdConstraint, PantryRecord, ResponseKind};
use pantry_core::retriever::apply_hard_filters;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::{AppState, Snapshot};

type AppStateRef = State<Arc<AppState>>;

pub(crate) fn routes() -> Router<Arc<AppState>> {
    Router::new()
        .route("/api/query", post(query))
        .route("/api/pantries", get(list_pantries))
        .route("/api/pantries/:id", get(get_pantry))
        .route("/api/admin/reindex", post(reindex))
        .route("/healthz", get(healthz))
}

pub(crate) struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError { status, message: message.into() }
    }

    fn unavailable() -> Self {
        Self::new(StatusCode::SERVICE_UNAVAILABLE, "dataset not loaded")
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": self.message }))).into_response()
    }
}

fn current(state: &AppState) -> Result<Arc<Snapshot>, ApiError> {
    state.snapshot().ok_or_else(ApiError::unavailable)
}

/// A record as sent to clients: every stored field plus retrieval flags and
/// a display form of the parsed schedule.
#[derive(Debug, Serialize)]
pub struct PantryView {
    #[serde(flatten)]
    pub record: PantryRecord,
    pub flags: FlagSet,
    pub hours_display: Option<String>,
}

impl PantryView {
    pub fn new(record: PantryRecord, flags: FlagSet) -> Self {
        let hours_display = record.hours.display();
        PantryView { record, flags, hours_display }
    }
}

#[derive(Debug, Deserialize)]
pub struct QueryRequest {
    #[serde(default)]
    pub session_id: Option<String>,
    #[serde(default)]
    pub query: String,
}

#[derive(Serialize)]
struct Trace {
    constraints: ConstraintSet,
    filter_trace: Vec<FilterStep>,
    generation: GenerationPath,
    model: String,
    embedding_provider: String,
    index_fingerprint: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    provider_error: Option<String>,
}

#[derive(Serialize)]
struct QueryResponse {
    session_id: String,
    kind: ResponseKind,
    text: String,
    pantries: Vec<PantryView>,
    grounding_violations: Vec<String>,
    trace: Trace,
    snapshot_at: Option<DateTime<Utc>>,
}

async fn query(State(state): AppStateRef, body: Option<Json<QueryRequest>>) -> Result<Json<QueryResponse>, ApiError> {
    let Some(Json(req)) = body else {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "expected a JSON body with a `query` field"));
    };
    if req.query.trim().is_empty() {
        return Err(ApiError::new(StatusCode::BAD_REQUEST, "query must not be empty"));
    }
    let snap = current(&state)?;
    let st = state.clone();
    let out = tokio::task::spawn_blocking(move || {
        let session = st.sessions.checkout(req.session_id.as_deref(), Utc::now());
        let mut session = session.lock().unwrap();
        let result = st.assistant.handle_turn(&mut session, &req.query, &snap.corpus);
        (result, snap)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("turn panicked: {e}")))?;

    let (result, snap) = out;
    let turn = result.map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let resp = turn.response;
    Ok(Json(QueryResponse {
        session_id: resp.session_id,
        kind: resp.kind,
        text: resp.text,
        pantries: turn.cited.into_iter().map(|c| PantryView::new(c.record, c.flags)).collect(),
        grounding_violations: resp.grounding_violations,
        trace: Trace {
            constraints: turn.constraints,
            filter_trace: turn.retrieval.map(|r| r.filter_trace).unwrap_or_default(),
            generation: turn.path,
            model: state.assistant.chat().model_id(),
            embedding_provider: snap.corpus.provider().fingerprint(),
            index_fingerprint: snap.fingerprint.clone(),
            provider_error: turn.provider_error,
        },
        snapshot_at: snap.corpus.snapshot_at(),
    }))
}

#[derive(Debug, Default, Deserialize)]
struct ListParams {
    county: Option<String>,
    city: Option<String>,
    zip: Option<String>,
    day: Option<String>,
    no_id: Option<String>,
}

fn non_empty(v: Option<String>) -> Option<String> {
    v.map(|s| s.trim().to_string()).filter(|s| !s.is_empty())
}

fn parse_flag(v: &str) -> Result<bool, ApiError> {
    match v.trim().to_ascii_lowercase().as_str() {
        "" | "0" | "false" | "no" => Ok(false),
        "1" | "true" | "yes" => Ok(true),
        other => Err(ApiError::new(StatusCode::BAD_REQUEST, format!("no_id must be true or false, got `{other}`"))),
    }
}

async fn list_pantries(State(state): AppStateRef, Query(p): Query<ListParams>) -> Result<Response, ApiError> {
    let day = match non_empty(p.day) {
        Some(d) => Some(
            Day::parse_token(&d)
                .ok_or_else(|| ApiError::new(StatusCode::BAD_REQUEST, format!("unknown day `{d}`")))?,
        ),
        None => None,
    };
    let no_id = match p.no_id.as_deref() {
        Some(v) => parse_flag(v)?,
        None => false,
    };
    let snap = current(&state)?;
    let cs = ConstraintSet {
        county: non_empty(p.county),
        city: non_empty(p.city),
        zip: non_empty(p.zip),
        day,
        id_constraint: no_id.then_some(IdConstraint::NoIdRequired),
        ..Default::default()
    };
    let out = apply_hard_filters(snap.corpus.records(), &cs);
    let pantries: Vec<PantryView> = out
        .survivors
        .iter()
        .filter_map(|id| snap.corpus.get(id))
        .map(|r| PantryView::new(r.clone(), out.flags.get(&r.id).cloned().unwrap_or_default()))
        .collect();
    Ok(Json(json!({
        "count": pantries.len(),
        "pantries": pantries,
        "filter_trace": out.trace,
        "snapshot_at": snap.corpus.snapshot_at(),
    }))
    .into_response())
}

async fn get_pantry(State(state): AppStateRef, Path(id): Path<String>) -> Result<Response, ApiError> {
    let snap = current(&state)?;
    let record = snap
        .corpus
        .get(&id)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, format!("no pantry with id `{id}`")))?;
    Ok(Json(json!({
        "pantry": PantryView::new(record.clone(), FlagSet::new()),
        "snapshot_at": snap.corpus.snapshot_at(),
    }))
    .into_response())
}

async fn healthz(State(state): AppStateRef) -> Response {
    match state.snapshot() {
        Some(snap) => Json(json!({
            "status": "ok",
            "dataset_count": snap.corpus.records().len(),
            "index_fingerprint": snap.fingerprint,
            "snapshot_at": snap.corpus.snapshot_at(),
        }))
        .into_response(),
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(json!({ "status": "loading", "dataset_count": 0, "index_fingerprint": null })),
        )
            .into_response(),
    }
}

async fn reindex(State(state): AppStateRef) -> Result<Response, ApiError> {
    let st = state.clone();
    let snap = tokio::task::spawn_blocking(move || st.reindex())
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, format!("reindex panicked: {e}")))?
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    Ok(Json(json!({
        "status": "reindexed",
        "dataset_count": snap.corpus.records().len(),
        "index_fingerprint": snap.fingerprint,
        "snapshot_at": snap.corpus.snapshot_at(),
    }))
    .into_response())
}
