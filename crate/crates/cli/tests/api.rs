mod common;

use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use axum::Router;
use common::pipeline;
use http_body_util::BodyExt;
use rekom_cli::args::ServeArgs;
use rekom_cli::server::{model_version, router, serve, AppState};
use rekom_cli::CliError;
use rekom_core::fixtures::two_cliques;
use serde_json::{json, Value};
use tower::ServiceExt;

fn trained_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    pipeline(&two_cliques(), dir.path(), 30);
    dir
}

fn app(dir: &Path, static_dir: Option<&Path>) -> Router {
    router(Arc::new(AppState::load(dir, dir).unwrap()), static_dir)
}

async fn send(app: &Router, req: Request<Body>) -> (StatusCode, Vec<u8>, axum::http::HeaderMap) {
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let headers = resp.headers().clone();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, body, headers)
}

async fn get(app: &Router, uri: &str) -> (StatusCode, Value) {
    let (status, body, _) = send(app, Request::get(uri).body(Body::empty()).unwrap()).await;
    (status, serde_json::from_slice(&body).unwrap())
}

async fn post_json(app: &Router, uri: &str, body: Value) -> (StatusCode, Value) {
    let req = Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap();
    let (status, body, _) = send(app, req).await;
    (status, serde_json::from_slice(&body).unwrap())
}

#[tokio::test]
async fn meta_reports_artifact_shape() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    let (status, meta) = get(&app, "/api/meta").await;
    assert_eq!(status, StatusCode::OK);
    let node_lines = std::fs::read_to_string(dir.path().join("nodes.csv")).unwrap().lines().count();
    assert_eq!(meta["n"], node_lines - 1);
    assert_eq!(meta["m"], 32);
    assert_eq!(meta["asset_types"].as_array().unwrap().len(), 6);
    assert_eq!(meta["feature_names"], json!(["asset_type", "degree", "centrality", "community"]));
    let bytes = std::fs::read(dir.path().join("embedding.bin")).unwrap();
    assert_eq!(meta["model_version"], model_version(&bytes));
}

#[tokio::test]
async fn node_lookup() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    let (status, node) = get(&app, "/api/nodes/w3").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(node["asset_type"], "workbook");
    assert_eq!(node["label"], "w3");
    let (status, err) = get(&app, "/api/nodes/zzz").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert!(err["error"].as_str().unwrap().contains("zzz"));
}

#[tokio::test]
async fn recommendations_are_sampled_rows() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    let (status, body) = get(&app, "/api/nodes/t0/recommendations?bins=10&per_bin=50&seed=4").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body["source"], "t0");
    assert_eq!(body["sample_seed"], 4);
    let rows = body["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 9);
    let probs: Vec<f64> = rows.iter().map(|r| r["probability"].as_f64().unwrap()).collect();
    assert!(probs.iter().all(|p| (0.0..=1.0).contains(p)));
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    for r in rows {
        let same_clique = r["destination"].as_str().unwrap().starts_with('t');
        assert_eq!(r["existing_edge"], same_clique);
        assert_eq!(r["hop_distance"], if same_clique { 1 } else { -1 });
    }

    let (_, small) = get(&app, "/api/nodes/t0/recommendations?bins=1&per_bin=3&seed=1").await;
    assert_eq!(small["rows"].as_array().unwrap().len(), 3);
    let (_, again) = get(&app, "/api/nodes/t0/recommendations?bins=1&per_bin=3&seed=1").await;
    assert_eq!(small, again);

    let (status, _) = get(&app, "/api/nodes/t0/recommendations?bins=0").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&app, "/api/nodes/t0/recommendations?per_bin=many").await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let (status, _) = get(&app, "/api/nodes/nope/recommendations").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn projection_points() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    let (status, all) = get(&app, "/api/projection").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(all.as_array().unwrap().len(), 10);
    let (_, some) = get(&app, "/api/projection?ids=t0,w1").await;
    let some = some.as_array().unwrap();
    assert_eq!(some.len(), 2);
    assert_eq!(some[0]["id"], "t0");
    assert_eq!(some[0]["asset_type"], "table");
    assert_eq!(some[1]["asset_type"], "workbook");
    assert!(some[0]["x"].as_f64().unwrap().is_finite());
    let (status, _) = get(&app, "/api/projection?ids=t0,ghost").await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn annotations_upsert_validate_and_persist() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    let (status, stored) =
        post_json(&app, "/api/annotations", json!({"source": "t0", "destination": "w2", "stars": 1})).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(stored["stars"], 1);
    assert_eq!(stored["note"], "");
    let (status, _) = post_json(
        &app,
        "/api/annotations",
        json!({"source": "t0", "destination": "w2", "stars": 4, "note": "on reflection, fine"}),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED);
    let (_, list) = get(&app, "/api/annotations?source=t0").await;
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["stars"], 4);

    for bad in [0, 6, 9, -1] {
        let (status, err) =
            post_json(&app, "/api/annotations", json!({"source": "t0", "destination": "w2", "stars": bad})).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "stars {bad}");
        assert!(err["error"].as_str().unwrap().contains("stars"));
    }
    let (status, _) =
        post_json(&app, "/api/annotations", json!({"source": "t0", "destination": "nobody", "stars": 3})).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = post_json(&app, "/api/annotations", json!({"source": "t0"})).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    // A fresh server over the same directory sees the acknowledged write.
    let reopened = self::app(dir.path(), None);
    let (_, list) = get(&reopened, "/api/annotations").await;
    assert_eq!(list.as_array().unwrap().len(), 1);
    assert_eq!(list[0]["note"], "on reflection, fine");
}

#[tokio::test]
async fn export_and_import_csv() {
    let dir = trained_dir();
    let app = app(dir.path(), None);
    for (dest, stars, note) in [("w0", 2, "a, b"), ("t1", 5, "")] {
        post_json(&app, "/api/annotations", json!({"source": "t0", "destination": dest, "stars": stars, "note": note}))
            .await;
    }
    let (status, body, headers) =
        send(&app, Request::get("/api/annotations/export").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert!(headers[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/csv"));
    assert!(headers[header::CONTENT_DISPOSITION].to_str().unwrap().starts_with("attachment"));
    let csv = String::from_utf8(body).unwrap();
    assert!(csv.starts_with("source,destination,stars,note,model_version,updated_at\r\n"));
    assert!(csv.contains("\"a, b\""));

    let fresh_dir = trained_dir();
    let fresh = self::app(fresh_dir.path(), None);
    let mut import = csv.clone();
    import.push_str("t0,w4,9,too high,v,2024-01-01T00:00:00Z\r\n");
    let req = Request::post("/api/annotations/import").body(Body::from(import)).unwrap();
    let (status, body, _) = send(&fresh, req).await;
    assert_eq!(status, StatusCode::OK);
    let report: Value = serde_json::from_slice(&body).unwrap();
    assert_eq!(report["imported"], 2);
    assert_eq!(report["rejected"], json!([{"line": 4, "reason": "stars must be between 1 and 5, got 9"}]), "{csv:?}");
    let (_, body, _) = send(&fresh, Request::get("/api/annotations/export").body(Body::empty()).unwrap()).await;
    assert_eq!(String::from_utf8(body).unwrap(), csv);

    let req = Request::post("/api/annotations/import").body(Body::from("t0,w1,3\n")).unwrap();
    let (status, _, _) = send(&fresh, req).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn static_files_are_served_at_root() {
    let dir = trained_dir();
    let site = tempfile::tempdir().unwrap();
    std::fs::write(site.path().join("index.html"), "<h1>rekom</h1>").unwrap();
    let app = app(dir.path(), Some(site.path()));
    let (status, body, _) = send(&app, Request::get("/").body(Body::empty()).unwrap()).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(body, b"<h1>rekom</h1>");
    let (status, _) = get(&app, "/api/meta").await;
    assert_eq!(status, StatusCode::OK);
}

#[test]
fn missing_artifact_is_named() {
    let dir = trained_dir();
    std::fs::remove_file(dir.path().join("embedding.bin")).unwrap();
    let err = AppState::load(dir.path(), dir.path()).err().unwrap();
    assert!(matches!(err, CliError::MissingArtifact { name: "embedding.bin", .. }));
    assert!(err.to_string().contains("embedding.bin"));
}

#[test]
fn busy_port_is_a_bind_error() {
    let dir = trained_dir();
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port();
    let args = ServeArgs {
        artifacts_dir: dir.path().to_path_buf(),
        graph_dir: None,
        port,
        host: "127.0.0.1".parse().unwrap(),
        static_dir: None,
    };
    let err = tokio::runtime::Runtime::new().unwrap().block_on(serve(&args)).unwrap_err();
    assert!(matches!(err, CliError::Bind { .. }), "{err}");
    assert!(err.to_string().contains(&format!("127.0.0.1:{port}")), "{err}");
}
