//! HTTP/JSON API over trained artifacts.
//!
//! Read paths share immutable artifacts without locking; annotation writes go
//! through one mutex-guarded store, so concurrent writes to the same key land
//! in arrival order.

use std::net::SocketAddr;
use std::path::Path;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use rekom_core::features::FEATURES_HEADER;
use rekom_core::gnn::{EmbeddingMatrix, EMBEDDING_FILE};
use rekom_core::projection::PROJECTION_FILE;
use rekom_core::recommend::{
    stratified_sample, Annotation, AnnotationStore, ImportReport, ANNOTATIONS_FILE, MAX_STARS,
    MIN_STARS,
};
use rekom_core::{NodeRecord, Projection2D, RecommendationRow, SampleSpec, Workbench};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tower_http::services::ServeDir;

use crate::args::ServeArgs;
use crate::commands::{load_graph, open, read_features, require};
use crate::error::CliError;

pub struct AppState {
    workbench: Workbench,
    projection: Projection2D,
    model_version: String,
    annotations: Mutex<AnnotationStore>,
}

pub type SharedState = Arc<AppState>;

/// Hex SHA-256 of the serialized embedding; annotations are keyed by it so
/// ratings of different models never overwrite each other.
pub fn model_version(embedding_bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(embedding_bytes))
}

impl AppState {
    pub fn new(
        workbench: Workbench,
        projection: Projection2D,
        model_version: String,
        annotations: AnnotationStore,
    ) -> Result<Self, rekom_core::Error> {
        let graph = workbench.graph();
        let missing: Vec<&str> = graph
            .nodes()
            .iter()
            .map(|n| n.id.as_str())
            .filter(|id| projection.get(id).is_none())
            .take(5)
            .collect();
        if !missing.is_empty() || projection.len() != graph.node_count() {
            return Err(rekom_core::Error::Inconsistent(format!(
                "projection has {} rows for {} nodes; missing: {}",
                projection.len(),
                graph.node_count(),
                missing.join(", ")
            )));
        }
        Ok(Self {
            workbench,
            projection,
            model_version,
            annotations: Mutex::new(annotations),
        })
    }

    /// Loads every artifact, naming the first missing file.
    pub fn load(graph_dir: &Path, artifacts_dir: &Path) -> Result<Self, CliError> {
        let graph = load_graph(graph_dir)?;
        let features = read_features(artifacts_dir, &graph)?;
        let embedding_path = require(artifacts_dir, EMBEDDING_FILE)?;
        let bytes = std::fs::read(&embedding_path).map_err(|e| CliError::file(&embedding_path, e))?;
        let embedding =
            EmbeddingMatrix::read_from(bytes.as_slice()).map_err(|e| CliError::file(&embedding_path, e))?;
        let projection_path = require(artifacts_dir, PROJECTION_FILE)?;
        let projection =
            Projection2D::read_csv(open(&projection_path)?).map_err(|e| CliError::file(&projection_path, e))?;
        let workbench = Workbench::new(graph, features, embedding)?;
        let journal = artifacts_dir.join(ANNOTATIONS_FILE);
        let annotations = AnnotationStore::open(&journal).map_err(|e| CliError::file(&journal, e))?;
        Ok(Self::new(workbench, projection, model_version(&bytes), annotations)?)
    }

    pub fn model_version(&self) -> &str {
        &self.model_version
    }

    pub fn workbench(&self) -> &Workbench {
        &self.workbench
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn bad_request(message: impl Into<String>) -> Self {
        Self {
            status: StatusCode::BAD_REQUEST,
            message: message.into(),
        }
    }
}

impl From<rekom_core::Error> for ApiError {
    fn from(e: rekom_core::Error) -> Self {
        use rekom_core::Error as E;
        let status = match &e {
            E::NotFound { .. } => StatusCode::NOT_FOUND,
            E::InvalidInput(_) | E::Ingest { .. } | E::DimensionMismatch(_) | E::Csv(_) => {
                StatusCode::BAD_REQUEST
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self {
            status,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(e: QueryRejection) -> Self {
        Self::bad_request(e.body_text())
    }
}

impl From<tokio::task::JoinError> for ApiError {
    fn from(e: tokio::task::JoinError) -> Self {
        Self {
            status: StatusCode::INTERNAL_SERVER_ERROR,
            message: e.to_string(),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}", self.message);
        }
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: SharedState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/api/meta", get(meta))
        .route("/api/nodes/{id}", get(node))
        .route("/api/nodes/{id}/recommendations", get(recommendations))
        .route("/api/projection", get(projection))
        .route("/api/annotations", post(annotate).get(list_annotations))
        .route("/api/annotations/export", get(export_annotations))
        .route("/api/annotations/import", post(import_annotations))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

pub async fn serve(args: &ServeArgs) -> Result<(), CliError> {
    let graph_dir = args.graph_dir.as_deref().unwrap_or(&args.artifacts_dir);
    let state = Arc::new(AppState::load(graph_dir, &args.artifacts_dir)?);
    let addr = SocketAddr::new(args.host, args.port);
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| CliError::Bind { addr, source })?;
    log::info!(
        "serving {} nodes (model {}) on http://{addr}",
        state.workbench.graph().node_count(),
        state.model_version
    );
    axum::serve(listener, router(state, args.static_dir.as_deref()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Meta<'a> {
    asset_types: Vec<&'a str>,
    feature_names: &'static [&'static str],
    model_version: &'a str,
    n: usize,
    m: usize,
}

async fn meta(State(state): State<SharedState>) -> Json<serde_json::Value> {
    let wb = &state.workbench;
    let meta = Meta {
        asset_types: wb.graph().asset_types().names(),
        feature_names: &FEATURES_HEADER[1..],
        model_version: &state.model_version,
        n: wb.embedding().len(),
        m: wb.embedding().dim(),
    };
    Json(serde_json::to_value(meta).expect("meta serializes"))
}

async fn node(State(state): State<SharedState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<NodeRecord>> {
    Ok(Json(state.workbench.graph().get_node(&id)?.clone()))
}

#[derive(Debug, Deserialize)]
struct SampleQuery {
    bins: Option<usize>,
    per_bin: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Serialize)]
struct RecommendationResponse {
    source: String,
    sample_seed: u64,
    rows: Vec<RecommendationRow>,
}

async fn recommendations(
    State(state): State<SharedState>,
    UrlPath(id): UrlPath<String>,
    query: Result<Query<SampleQuery>, QueryRejection>,
) -> ApiResult<Json<RecommendationResponse>> {
    let Query(q) = query?;
    let defaults = SampleSpec::default();
    let spec = SampleSpec::new(
        q.bins.unwrap_or(defaults.bins()),
        q.per_bin.unwrap_or(defaults.per_bin()),
        q.seed.unwrap_or(defaults.seed()),
    )?;
    let rows = tokio::task::spawn_blocking(move || {
        state
            .workbench
            .recommendations(&id)
            .map(|rows| (id, stratified_sample(&rows, &spec)))
    })
    .await??;
    Ok(Json(RecommendationResponse {
        source: rows.0,
        sample_seed: spec.seed(),
        rows: rows.1,
    }))
}

#[derive(Debug, Deserialize)]
struct ProjectionQuery {
    ids: Option<String>,
}

#[derive(Debug, Serialize)]
struct ProjectedNode<'a> {
    id: &'a str,
    x: f64,
    y: f64,
    asset_type: &'a str,
}

async fn projection(
    State(state): State<SharedState>,
    query: Result<Query<ProjectionQuery>, QueryRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Query(q) = query?;
    let graph = state.workbench.graph();
    let point = |id: &str| -> ApiResult<serde_json::Value> {
        let node = graph.get_node(id)?;
        let [x, y] = state
            .projection
            .get(id)
            .ok_or_else(|| ApiError::from(rekom_core::Error::Inconsistent(format!("{id} is not projected"))))?;
        Ok(serde_json::to_value(ProjectedNode {
            id: &node.id,
            x,
            y,
            asset_type: &node.asset_type.name,
        })
        .expect("point serializes"))
    };
    let points = match q.ids.as_deref().filter(|s| !s.trim().is_empty()) {
        Some(list) => list
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(point)
            .collect::<ApiResult<Vec<_>>>()?,
        None => state
            .projection
            .ids()
            .iter()
            .map(|id| point(id))
            .collect::<ApiResult<Vec<_>>>()?,
    };
    Ok(Json(serde_json::Value::Array(points)))
}

#[derive(Debug, Deserialize)]
struct AnnotationRequest {
    source: String,
    destination: String,
    /// Wider than the stored type so out-of-range values get a clear message.
    stars: i64,
    #[serde(default)]
    note: String,
    /// Defaults to the served model.
    model_version: Option<String>,
}

async fn annotate(
    State(state): State<SharedState>,
    body: Result<Json<AnnotationRequest>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Annotation>)> {
    let Json(req) = body?;
    let stars = u8::try_from(req.stars)
        .ok()
        .filter(|s| (MIN_STARS..=MAX_STARS).contains(s))
        .ok_or_else(|| {
            ApiError::bad_request(format!(
                "stars must be between {MIN_STARS} and {MAX_STARS}, got {}",
                req.stars
            ))
        })?;
    let graph = state.workbench.graph();
    graph.get_node(&req.source)?;
    graph.get_node(&req.destination)?;
    let annotation = Annotation {
        source: req.source,
        destination: req.destination,
        stars,
        note: req.note,
        model_version: req.model_version.unwrap_or_else(|| state.model_version.clone()),
        updated_at: Utc::now(),
    };
    let stored = tokio::task::spawn_blocking(move || {
        state
            .annotations
            .lock()
            .expect("annotation store lock")
            .annotate(annotation)
    })
    .await??;
    Ok((StatusCode::CREATED, Json(stored)))
}

#[derive(Debug, Deserialize)]
struct AnnotationQuery {
    source: Option<String>,
}

async fn list_annotations(
    State(state): State<SharedState>,
    query: Result<Query<AnnotationQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<Annotation>>> {
    let Query(q) = query?;
    let store = state.annotations.lock().expect("annotation store lock");
    Ok(Json(store.list(q.source.as_deref())))
}

async fn export_annotations(State(state): State<SharedState>) -> ApiResult<Response> {
    let csv = state
        .annotations
        .lock()
        .expect("annotation store lock")
        .export_csv_string()?;
    Ok((
        [
            (header::CONTENT_TYPE, "text/csv; charset=utf-8"),
            (header::CONTENT_DISPOSITION, "attachment; filename=\"annotations.csv\""),
        ],
        csv,
    )
        .into_response())
}

async fn import_annotations(State(state): State<SharedState>, body: String) -> ApiResult<Json<ImportReport>> {
    let report = tokio::task::spawn_blocking(move || {
        state
            .annotations
            .lock()
            .expect("annotation store lock")
            .import_csv(body.as_bytes())
    })
    .await??;
    Ok(Json(report))
}
