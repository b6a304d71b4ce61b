//! HTTP API over the library store, validation, skeleton import and jobs.
//!
//! Errors are JSON `{"error": ..., "report": ...}` with status 400 for
//! malformed input, 404 for unknown ids, 409 for version conflicts and
//! unfinished jobs, 422 when a schema fails validation (report attached).

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use schemakit::ontology::Ontology;
use schemakit::schema::{
    read_skeletons, schema_from_skeleton, validate_schema, Schema, SkeletonSchema, ValidationReport,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::Settings;
use crate::jobs::{JobKind, JobManager, JobSpec, JobStatus};
use crate::store::{check_id, LibraryStore, StoreError};

pub struct AppState {
    pub settings: Settings,
    pub ontology: Arc<Ontology>,
    pub store: LibraryStore,
    pub jobs: Arc<JobManager>,
    /// Skeletons loaded at startup; finished build jobs add theirs on lookup.
    pub skeletons: RwLock<BTreeMap<String, SkeletonSchema>>,
}

impl AppState {
    /// Opens the store at `settings.library` and loads startup skeletons.
    pub fn new(settings: Settings, ontology: Ontology) -> anyhow::Result<Self> {
        let store = LibraryStore::open(&settings.library)?;
        let mut skeletons = BTreeMap::new();
        if let Some(path) = &settings.server.skeletons {
            for s in read_skeletons(&std::fs::read_to_string(path)?)? {
                skeletons.insert(s.id.clone(), s);
            }
        }
        Ok(AppState {
            jobs: Arc::new(JobManager::new(
                &settings.server.data_dir,
                settings.server.workers,
            )),
            settings,
            ontology: Arc::new(ontology),
            store,
            skeletons: RwLock::new(skeletons),
        })
    }

    fn skeleton(&self, id: &str) -> Option<SkeletonSchema> {
        if let Some(s) = self
            .skeletons
            .read()
            .unwrap_or_else(|p| p.into_inner())
            .get(id)
        {
            return Some(s.clone());
        }
        // Latest finished build job that produced this id.
        let found = self
            .jobs
            .list()
            .into_iter()
            .rev()
            .filter(|j| j.kind == JobKind::Build && j.status == JobStatus::Done)
            .filter_map(|j| {
                j.outputs
                    .into_iter()
                    .find(|p| p.ends_with("skeletons.jsonl"))
            })
            .find_map(|p| load_skeletons(&p).into_iter().find(|s| s.id == id))?;
        Some(found)
    }
}

fn load_skeletons(path: &Path) -> Vec<SkeletonSchema> {
    std::fs::read_to_string(path)
        .ok()
        .and_then(|t| read_skeletons(&t).ok())
        .unwrap_or_default()
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
    report: Option<ValidationReport>,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        ApiError {
            status,
            message: message.into(),
            report: None,
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, message)
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match &e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::Conflict { .. } => StatusCode::CONFLICT,
            StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            StoreError::Core(_) | StoreError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError::new(status, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": self.message, "report": self.report });
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn parse_schema(body: &[u8]) -> ApiResult<Schema> {
    Schema::from_json(body).map_err(|e| ApiError::bad_request(e.to_string()))
}

fn etag(version: u64) -> HeaderValue {
    HeaderValue::from_str(&format!("\"{version}\"")).expect("digits are a valid header")
}

/// `If-Match: "3"` or `If-Match: 3`.
fn if_match(headers: &HeaderMap) -> ApiResult<Option<u64>> {
    let Some(v) = headers.get(header::IF_MATCH) else {
        return Ok(None);
    };
    let text = v
        .to_str()
        .map_err(|_| ApiError::bad_request("If-Match is not text"))?;
    let text = text.trim().trim_start_matches("W/").trim_matches('"');
    text.parse()
        .map(Some)
        .map_err(|_| ApiError::bad_request(format!("If-Match `{text}` is not a schema version")))
}

fn json_bytes(status: StatusCode, bytes: Vec<u8>, version: Option<u64>) -> Response {
    let mut resp = (
        status,
        [(
            header::CONTENT_TYPE,
            HeaderValue::from_static("application/json"),
        )],
        bytes,
    )
        .into_response();
    if let Some(v) = version {
        resp.headers_mut().insert(header::ETAG, etag(v));
    }
    resp
}

async fn get_ontology(State(app): State<Arc<AppState>>) -> Json<Value> {
    Json(serde_json::to_value(app.ontology.to_document()).expect("ontology serializes"))
}

async fn list_schemas(State(app): State<Arc<AppState>>) -> ApiResult<Json<Value>> {
    Ok(Json(json!({ "schemas": app.store.list()? })))
}

async fn get_schema(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let (schema, version) = app.store.get(&id)?;
    Ok(json_bytes(StatusCode::OK, schema.to_json(), Some(version)))
}

#[derive(Debug, Default, Deserialize)]
struct PutQuery {
    /// Persist even with validation errors.
    #[serde(default)]
    draft: bool,
}

#[derive(Debug, Serialize)]
struct Saved {
    id: String,
    version: u64,
    report: ValidationReport,
}

async fn put_schema(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<PutQuery>,
    headers: HeaderMap,
    body: Bytes,
) -> ApiResult<Response> {
    check_id(&id)?;
    let expected = if_match(&headers)?;
    let schema = parse_schema(&body)?;
    if schema.id != id {
        return Err(ApiError::bad_request(format!(
            "body id `{}` differs from path id `{id}`",
            schema.id
        )));
    }
    let report = validate_schema(&schema, &app.ontology);
    if !report.ok && !q.draft {
        return Err(ApiError {
            status: StatusCode::UNPROCESSABLE_ENTITY,
            message: format!("schema `{id}` has validation errors"),
            report: Some(report),
        });
    }
    let version = app.store.put(&schema, expected)?;
    let status = if expected.unwrap_or(0) == 0 {
        StatusCode::CREATED
    } else {
        StatusCode::OK
    };
    let mut resp = (
        status,
        Json(Saved {
            id,
            version,
            report,
        }),
    )
        .into_response();
    resp.headers_mut().insert(header::ETAG, etag(version));
    Ok(resp)
}

async fn delete_schema(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    headers: HeaderMap,
) -> ApiResult<StatusCode> {
    app.store.delete(&id, if_match(&headers)?)?;
    Ok(StatusCode::NO_CONTENT)
}

/// Pure: validates the body without touching the store.
async fn validate(
    State(app): State<Arc<AppState>>,
    body: Bytes,
) -> ApiResult<Json<ValidationReport>> {
    let schema = parse_schema(&body)?;
    Ok(Json(validate_schema(&schema, &app.ontology)))
}

async fn list_skeletons(State(app): State<Arc<AppState>>) -> Json<Value> {
    let loaded: Vec<SkeletonSchema> = app
        .skeletons
        .read()
        .unwrap_or_else(|p| p.into_inner())
        .values()
        .cloned()
        .collect();
    Json(json!({ "skeletons": loaded }))
}

async fn instantiate(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let skeleton = app
        .skeleton(&id)
        .ok_or_else(|| ApiError::not_found(format!("no skeleton `{id}`")))?;
    let schema = schema_from_skeleton(&skeleton, &app.ontology)
        .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
    Ok(json_bytes(StatusCode::OK, schema.to_json(), None))
}

async fn submit_job(
    State(app): State<Arc<AppState>>,
    UrlPath(kind): UrlPath<String>,
    body: Bytes,
) -> ApiResult<Response> {
    let kind = JobKind::parse(&kind)
        .ok_or_else(|| ApiError::not_found(format!("no job kind `{kind}`")))?;
    let request: Value = if body.iter().all(u8::is_ascii_whitespace) {
        Value::Null
    } else {
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request(e.to_string()))?
    };
    let (spec, params) =
        JobSpec::resolve(kind, request, &app.settings).map_err(ApiError::bad_request)?;
    let library = app.store.snapshot()?;
    let record = app
        .jobs
        .submit(kind, spec, params, Arc::clone(&app.ontology), library);
    Ok((StatusCode::ACCEPTED, Json(record)).into_response())
}

async fn list_jobs(State(app): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({ "jobs": app.jobs.list() }))
}

async fn get_job(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> ApiResult<Response> {
    let record = app
        .jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no job `{id}`")))?;
    Ok(Json(record).into_response())
}

#[derive(Debug, Default, Deserialize)]
struct OutputQuery {
    /// Output file name; the first output when absent.
    file: Option<String>,
}

async fn job_output(
    State(app): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<OutputQuery>,
) -> ApiResult<Response> {
    let record = app
        .jobs
        .get(&id)
        .ok_or_else(|| ApiError::not_found(format!("no job `{id}`")))?;
    match record.status {
        JobStatus::Done => {}
        JobStatus::Failed => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("job `{id}` failed: {}", record.error.unwrap_or_default()),
            ))
        }
        s => {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                format!("job `{id}` is {s:?}"),
            ))
        }
    }
    let dir = app.jobs.job_dir(&id);
    let path = match &q.file {
        Some(name) => record
            .outputs
            .iter()
            .find(|p| p.strip_prefix(&dir).is_ok_and(|r| r == Path::new(name))),
        None => record.outputs.first(),
    }
    .ok_or_else(|| {
        ApiError::not_found(format!(
            "job `{id}` has no output `{}`",
            q.file.unwrap_or_default()
        ))
    })?;
    let bytes = std::fs::read(path)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    let mime = if path.extension().is_some_and(|x| x == "json") {
        "application/json"
    } else {
        "text/plain; charset=utf-8"
    };
    Ok((
        [(header::CONTENT_TYPE, HeaderValue::from_static(mime))],
        bytes,
    )
        .into_response())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ontology", get(get_ontology))
        .route("/schemas", get(list_schemas))
        .route(
            "/schemas/{id}",
            get(get_schema).put(put_schema).delete(delete_schema),
        )
        .route("/validate", post(validate))
        .route("/skeletons", get(list_skeletons))
        .route("/skeletons/{id}/instantiate", post(instantiate))
        .route("/jobs", get(list_jobs))
        .route("/jobs/{id}", get(get_job).post(submit_job))
        .route("/jobs/{id}/output", get(job_output))
        .with_state(state)
}

/// Serves until interrupted.
pub async fn serve(state: AppState) -> anyhow::Result<()> {
    let bind = state.settings.server.bind.clone();
    let listener = tokio::net::TcpListener::bind(&bind).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
