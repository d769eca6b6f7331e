use std::collections::{BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use pantry_core::assistant::Assistant;
use pantry_core::dataset::{load_dataset, save_dataset};
use pantry_core::model::{ConstraintSet, Day, IdConstraint};
use pantry_core::retriever::apply_hard_filters;
use pantry_core::vector::{EmbeddingProvider, StubEmbedder};
use pantry_service::{load_snapshot, router, AppState, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_dataset() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/dataset.json")
}

fn provider() -> Arc<dyn EmbeddingProvider> {
    Arc::new(StubEmbedder::default())
}

fn state_for(data_path: PathBuf, index_path: Option<PathBuf>) -> Arc<AppState> {
    let config = ServiceConfig { data_path, index_path, cors_origins: vec!["*".into()] };
    Arc::new(AppState::new(config, Assistant::offline(), provider()))
}

fn loaded() -> (Arc<AppState>, Router) {
    let state = state_for(fixture_dataset(), None);
    state.load().unwrap();
    let app = router(state.clone());
    (state, app)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.clone().oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = to_bytes(resp.into_body(), usize::MAX).await.unwrap();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap() };
    (status, value)
}

fn ids(pantries: &Value) -> BTreeSet<String> {
    pantries.as_array().unwrap().iter().map(|p| p["id"].as_str().unwrap().to_string()).collect()
}

#[tokio::test]
async fn county_query_answers_with_county_records() {
    let (state, app) = loaded();
    let (status, body) =
        call(&app, "POST", "/api/query", Some(json!({"query": "Where can I find food pantries in Sedgwick County?"})))
            .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["kind"], "answer");
    assert!(body["grounding_violations"].as_array().unwrap().is_empty());
    assert_eq!(body["trace"]["constraints"]["county"], "Sedgwick");
    assert!(body["snapshot_at"].is_string());
    let snap = state.snapshot().unwrap();
    let pantries = body["pantries"].as_array().unwrap();
    assert!(!pantries.is_empty());
    for p in pantries {
        let rec = snap.corpus.get(p["id"].as_str().unwrap()).unwrap();
        assert_eq!(rec.county, "Sedgwick");
        assert!(p["name"].is_string() && p["street_address"].is_string());
        assert!(p.get("hours_display").is_some());
        assert!(body["text"].as_str().unwrap().contains(p["name"].as_str().unwrap()));
    }
}

#[tokio::test]
async fn ambiguous_query_asks_then_follow_up_answers() {
    let (_, app) = loaded();
    let (status, first) =
        call(&app, "POST", "/api/query", Some(json!({"query": "Where can I get free food near me?"}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(first["kind"], "clarification");
    assert!(first["pantries"].as_array().unwrap().is_empty());
    let sid = first["session_id"].as_str().unwrap().to_string();

    let (_, second) = call(&app, "POST", "/api/query", Some(json!({"session_id": sid, "query": "Wichita"}))).await;
    assert_eq!(second["kind"], "answer");
    assert_eq!(second["session_id"], sid.as_str());
    let (_, direct) = call(&app, "POST", "/api/query", Some(json!({"query": "food pantries in Wichita"}))).await;
    assert_eq!(ids(&second["pantries"]), ids(&direct["pantries"]));
}

#[tokio::test]
async fn bad_requests_are_rejected() {
    let (_, app) = loaded();
    let (status, body) = call(&app, "POST", "/api/query", Some(json!({"query": "   "}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert!(body["error"].is_string());
    let (status, _) = call(&app, "POST", "/api/query", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/api/pantries?day=someday", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = call(&app, "GET", "/api/pantries?no_id=maybe", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn unloaded_service_reports_unavailable() {
    let app = router(state_for(fixture_dataset(), None));
    let (status, body) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    assert_eq!(body["status"], "loading");
    let (status, _) = call(&app, "POST", "/api/query", Some(json!({"query": "pantries in Derby"}))).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
    let (status, _) = call(&app, "GET", "/api/pantries", None).await;
    assert_eq!(status, StatusCode::SERVICE_UNAVAILABLE);
}

#[tokio::test]
async fn listing_matches_hard_filters() {
    let (state, app) = loaded();
    let records = state.snapshot().unwrap().corpus.records().to_vec();
    let cases = [
        ("/api/pantries", ConstraintSet::default()),
        ("/api/pantries?city=derby&day=wed", ConstraintSet { city: Some("derby".into()), day: Some(Day::Wed), ..Default::default() }),
        (
            "/api/pantries?city=Maize&no_id=true",
            ConstraintSet { city: Some("Maize".into()), id_constraint: Some(IdConstraint::NoIdRequired), ..Default::default() },
        ),
        ("/api/pantries?county=Sedgwick&zip=67214", ConstraintSet {
            county: Some("Sedgwick".into()),
            zip: Some("67214".into()),
            ..Default::default()
        }),
    ];
    for (uri, cs) in cases {
        let (status, body) = call(&app, "GET", uri, None).await;
        assert_eq!(status, StatusCode::OK, "{uri}");
        let expected = apply_hard_filters(&records, &cs);
        let got: Vec<&str> = body["pantries"].as_array().unwrap().iter().map(|p| p["id"].as_str().unwrap()).collect();
        assert_eq!(got, expected.survivors.iter().map(String::as_str).collect::<Vec<_>>(), "{uri}");
        assert_eq!(body["count"], got.len());
        for p in body["pantries"].as_array().unwrap() {
            let want: Vec<Value> = expected
                .flags
                .get(p["id"].as_str().unwrap())
                .map(|f| f.iter().map(|x| serde_json::to_value(x).unwrap()).collect())
                .unwrap_or_default();
            assert_eq!(p["flags"].as_array().unwrap(), &want, "{uri}");
        }
    }
}

#[tokio::test]
async fn pantry_lookup_and_health() {
    let (state, app) = loaded();
    let id = state.snapshot().unwrap().corpus.records()[0].id.clone();
    let (status, body) = call(&app, "GET", &format!("/api/pantries/{id}"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["pantry"]["id"], id.as_str());
    let (status, body) = call(&app, "GET", "/api/pantries/no-such-pantry", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(body["error"].as_str().unwrap().contains("no-such-pantry"));

    let (status, body) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["status"], "ok");
    assert_eq!(body["dataset_count"], 30);
    assert_eq!(body["index_fingerprint"].as_str().unwrap().len(), 64);
}

#[tokio::test]
async fn cors_preflight_is_answered() {
    let (_, app) = loaded();
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/api/query")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = app.oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_sessions_stay_isolated() {
    let (state, app) = loaded();
    let towns = ["Derby", "Maize", "Wichita", "Leoti"];
    let mut tasks = Vec::new();
    for i in 0..16 {
        let app = app.clone();
        let town = towns[i % towns.len()];
        tasks.push(tokio::spawn(async move {
            let sid = format!("user-{i}");
            let (_, first) =
                call(&app, "POST", "/api/query", Some(json!({"session_id": sid, "query": "I need food near me"}))).await;
            assert_eq!(first["kind"], "clarification");
            let (_, second) = call(&app, "POST", "/api/query", Some(json!({"session_id": sid, "query": town}))).await;
            (town, second)
        }));
    }
    let snap = state.snapshot().unwrap();
    for t in tasks {
        let (town, body) = t.await.unwrap();
        assert_eq!(body["kind"], "answer", "{town}");
        assert_eq!(body["trace"]["constraints"]["city"], town);
        for id in ids(&body["pantries"]) {
            assert_eq!(snap.corpus.get(&id).unwrap().city, town);
        }
    }
    assert_eq!(state.sessions().len(), 16);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn queries_see_whole_snapshots_during_reindex() {
    let dir = tempfile::tempdir().unwrap();
    let full = load_dataset(&fixture_dataset()).unwrap();
    let half: Vec<_> = full.iter().filter(|r| r.county != "Sedgwick").cloned().collect();
    let variants = [dir.path().join("full.json"), dir.path().join("half.json")];
    save_dataset(&variants[0], &full).unwrap();
    save_dataset(&variants[1], &half).unwrap();

    // fingerprint -> the ids that snapshot may cite
    let mut allowed: HashMap<String, BTreeSet<String>> = HashMap::new();
    for path in &variants {
        let snap = load_snapshot(path, None, provider(), true).unwrap();
        allowed.insert(snap.fingerprint.clone(), snap.corpus.records().iter().map(|r| r.id.clone()).collect());
    }
    assert_eq!(allowed.len(), 2);

    let live = dir.path().join("dataset.json");
    std::fs::copy(&variants[0], &live).unwrap();
    let state = state_for(live.clone(), Some(dir.path().join("index.bin")));
    state.load().unwrap();
    let app = router(state.clone());

    let swapper = {
        let app = app.clone();
        let dir = dir.path().to_path_buf();
        tokio::spawn(async move {
            for round in 0..12 {
                let tmp = dir.join("dataset.json.next");
                std::fs::copy(&variants[round % 2], &tmp).unwrap();
                std::fs::rename(&tmp, dir.join("dataset.json")).unwrap();
                let (status, _) = call(&app, "POST", "/api/admin/reindex", None).await;
                assert_eq!(status, StatusCode::OK);
            }
        })
    };
    let mut readers = Vec::new();
    for i in 0..8 {
        let app = app.clone();
        readers.push(tokio::spawn(async move {
            let mut seen = Vec::new();
            for _ in 0..10 {
                let q = if i % 2 == 0 { "food pantries in Kansas" } else { "pantries in Wichita" };
                let (status, body) = call(&app, "POST", "/api/query", Some(json!({"query": q}))).await;
                assert_eq!(status, StatusCode::OK);
                seen.push((body["trace"]["index_fingerprint"].as_str().unwrap().to_string(), ids(&body["pantries"])));
            }
            seen
        }));
    }
    swapper.await.unwrap();
    for r in readers {
        for (fp, cited) in r.await.unwrap() {
            let ok = allowed.get(&fp).unwrap_or_else(|| panic!("unknown fingerprint {fp}"));
            assert!(cited.is_subset(ok), "cited {cited:?} outside snapshot {fp}");
        }
    }
    // last round installed the half dataset
    let (_, health) = call(&app, "GET", "/healthz", None).await;
    assert_eq!(health["dataset_count"], half.len());
    assert!(allowed.contains_key(health["index_fingerprint"].as_str().unwrap()));
}
