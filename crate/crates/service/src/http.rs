//! HTTP API. Mutations run as background jobs and answer `202 Accepted`
//! with the job; clients poll `GET /jobs/{id}`. Every POST honours an
//! `Idempotency-Key` header.

use std::path::Path;
use std::sync::Arc;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use lexigraph_core::engine::{RunConfig, RunProgress};
use lexigraph_core::matcher::{MatchParams, VectorSelection};
use lexigraph_core::store::{RunId, RunStatus};
use lexigraph_core::Workbench;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::config::ServiceConfig;
use crate::error::ServiceError;
use crate::jobs::{Job, JobKind, JobRegistry, JobStatus};
use crate::ops::{CodeSetRequest, CustomTableRequest, ImportRequest, MatchBatchRequest};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

#[derive(Clone)]
pub struct AppState {
    pub wb: Arc<Workbench>,
    pub jobs: Arc<JobRegistry>,
}

impl AppState {
    pub fn new(wb: Workbench) -> Self {
        AppState {
            wb: Arc::new(wb),
            jobs: Arc::new(JobRegistry::new()),
        }
    }
}

pub struct ApiError(pub ServiceError);

impl<E: Into<ServiceError>> From<E> for ApiError {
    fn from(e: E) -> Self {
        ApiError(e.into())
    }
}

pub fn status_for(kind: &str) -> StatusCode {
    match kind {
        "NotFound" => StatusCode::NOT_FOUND,
        "BadRequest" | "InvalidSpec" | "InvalidInput" | "FilterError" | "QueryError" | "TemplateError"
        | "InvalidSchema" | "InvalidQuery" | "ImportEmpty" | "EmptySet" | "ConfigError" | "ExpansionError" => {
            StatusCode::BAD_REQUEST
        }
        "RunClosed" | "InvalidTransition" => StatusCode::CONFLICT,
        _ => StatusCode::INTERNAL_SERVER_ERROR,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = self.0.body();
        (status_for(&body.kind), Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

pub fn router(state: AppState, static_dir: Option<&Path>) -> Router {
    let api = Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/terminologies/import", post(import_terminology))
        .route("/code-sets", post(create_code_set))
        .route("/code-sets/{id}", get(get_code_set))
        .route("/runs", post(post_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/triples", get(get_triples))
        .route("/matches/batch", post(match_batch))
        .route("/matches", get(get_matches))
        .route("/custom-tables", post(custom_table))
        .route("/jobs/{id}", get(get_job))
        .route("/export", get(export))
        .route("/export/hash", get(export_hash))
        .with_state(state);
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

fn idempotency_key(headers: &HeaderMap) -> Option<String> {
    headers
        .get(IDEMPOTENCY_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::to_string)
}

fn accepted(job: Job) -> Response {
    (StatusCode::ACCEPTED, Json(job)).into_response()
}

/// Registers a one-step job and runs `work` on the blocking pool.
fn submit(
    state: &AppState,
    kind: JobKind,
    key: Option<String>,
    work: impl FnOnce(&Workbench) -> Result<Value, ServiceError> + Send + 'static,
) -> ApiResult<Response> {
    let (job, created) = state.jobs.submit(kind, key.as_deref(), || Ok(None))?;
    if created {
        let (wb, jobs, id) = (state.wb.clone(), state.jobs.clone(), job.id.clone());
        tokio::task::spawn_blocking(move || {
            jobs.start(&id);
            jobs.progress(&id, 0, 1);
            match work(&wb) {
                Ok(v) => jobs.finish(&id, JobStatus::Completed, v),
                Err(e) => {
                    log::warn!("{id} failed: {e}");
                    jobs.fail(&id, &e)
                }
            }
        });
    }
    Ok(accepted(job))
}

async fn import_terminology(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<ImportRequest>,
) -> ApiResult<Response> {
    submit(&state, JobKind::TerminologyImport, idempotency_key(&headers), move |wb| req.execute(wb))
}

async fn create_code_set(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<CodeSetRequest>,
) -> ApiResult<Response> {
    submit(&state, JobKind::CodeSet, idempotency_key(&headers), move |wb| req.execute(wb))
}

async fn match_batch(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<MatchBatchRequest>,
) -> ApiResult<Response> {
    req.params.validate().map_err(lexigraph_core::Error::from)?;
    submit(&state, JobKind::MatchBatch, idempotency_key(&headers), move |wb| req.execute(wb))
}

async fn custom_table(
    State(state): State<AppState>,
    headers: HeaderMap,
    Json(req): Json<CustomTableRequest>,
) -> ApiResult<Response> {
    submit(&state, JobKind::CustomTable, idempotency_key(&headers), move |wb| req.execute(wb))
}

/// Validates and registers the run immediately so the response carries its
/// id; concepts are processed in the background, one run per code set at a
/// time.
async fn post_run(State(state): State<AppState>, headers: HeaderMap, Json(cfg): Json<RunConfig>) -> ApiResult<Response> {
    let key = idempotency_key(&headers);
    let st = state.clone();
    let cfg2 = cfg.clone();
    let (job, created) = tokio::task::spawn_blocking(move || {
        st.jobs.submit(JobKind::RelationshipRun, key.as_deref(), || {
            let run = st.wb.start_run(&cfg2)?;
            Ok(Some(run.id.to_string()))
        })
    })
    .await
    .map_err(|e| ServiceError::BadRequest(format!("run submission aborted: {e}")))??;
    if created {
        let (wb, jobs) = (state.wb.clone(), state.jobs.clone());
        let job_id = job.id.clone();
        let run_id = RunId::new(job.run_id.clone().expect("run job has a run id"));
        tokio::task::spawn_blocking(move || execute_run_job(&wb, &jobs, &job_id, &run_id, &cfg));
    }
    Ok(accepted(job))
}

fn execute_run_job(wb: &Workbench, jobs: &JobRegistry, job_id: &str, run_id: &RunId, cfg: &RunConfig) {
    let outcome = (|| -> Result<(JobStatus, Value), ServiceError> {
        let run = wb.store().run(run_id)?;
        let total = wb.store().code_set(&run.code_set_id)?.member_code_ids.len();
        jobs.progress(job_id, 0, total);
        let queue = jobs.run_queue(run.code_set_id.as_str());
        let _turn = queue.lock();
        jobs.start(job_id);
        let progress = |p: &RunProgress| jobs.progress(job_id, p.concepts_done, p.concepts);
        let report = wb.execute_run(run_id, cfg, Some(&progress))?;
        let status = match report.status {
            RunStatus::KilledBudget => JobStatus::KilledBudget,
            _ => JobStatus::Completed,
        };
        Ok((status, json!({ "report": report, "log": report.log })))
    })();
    match outcome {
        Ok((status, v)) => jobs.finish(job_id, status, v),
        Err(e) => {
            log::warn!("{job_id} failed: {e}");
            jobs.fail(job_id, &e)
        }
    }
}

async fn get_job(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Job>> {
    Ok(Json(state.jobs.get(&id)?))
}

async fn get_code_set(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let store = state.wb.store();
    let cs = store.find_code_set(&id)?;
    let members: Vec<Value> = store
        .code_set_members(&cs.id)?
        .iter()
        .map(|c| json!({ "code_id": c.code_id, "main_string": c.main_text() }))
        .collect();
    Ok(Json(json!({ "code_set": cs, "members": members })))
}

async fn get_run(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let run = state.wb.store().run(&RunId::new(id.as_str()))?;
    Ok(Json(json!({ "run": run, "job": state.jobs.for_run(&id) })))
}

async fn get_triples(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<Value>> {
    let triples = state.wb.store().triples(&RunId::new(id.as_str()))?;
    Ok(Json(json!(triples)))
}

#[derive(Debug, Deserialize)]
struct MatchLookup {
    object: String,
    /// When given and nothing is stored yet, the match is computed.
    code_set: Option<String>,
    n: Option<usize>,
    z: Option<f64>,
}

async fn get_matches(State(state): State<AppState>, Query(q): Query<MatchLookup>) -> ApiResult<Json<Value>> {
    let wb = state.wb.clone();
    let results = tokio::task::spawn_blocking(move || -> Result<Vec<lexigraph_core::matcher::MatchResult>, ServiceError> {
        let mut results = wb.store().matches_for(&q.object);
        if let Some(cs) = &q.code_set {
            let cs = wb.store().find_code_set(cs)?;
            results.retain(|r| r.code_set_id == cs.id);
            if results.is_empty() {
                let defaults = MatchParams::default();
                let params = MatchParams {
                    selection: VectorSelection::default(),
                    z: q.z.unwrap_or(defaults.z),
                    n: q.n.unwrap_or(defaults.n),
                };
                results.push(wb.match_one(&q.object, cs.id.as_str(), &params)?);
            }
        }
        if let Some(n) = q.n {
            for r in &mut results {
                r.ranked.truncate(n);
            }
        }
        Ok(results)
    })
    .await
    .map_err(|e| ServiceError::BadRequest(format!("match lookup aborted: {e}")))??;
    Ok(Json(json!(results)))
}

async fn export(State(state): State<AppState>) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], state.wb.export()).into_response()
}

async fn export_hash(State(state): State<AppState>) -> Json<Value> {
    Json(json!({ "hash": state.wb.export_hash() }))
}

/// Opens the workbench, binds and serves until interrupted.
pub async fn serve(cfg: ServiceConfig) -> Result<(), ServiceError> {
    let wb = Workbench::open(cfg.workbench.clone())?;
    let listener = tokio::net::TcpListener::bind(&cfg.bind)
        .await
        .map_err(|e| ServiceError::Config {
            path: cfg.bind.clone(),
            message: format!("cannot listen: {e}"),
        })?;
    let app = router(AppState::new(wb), cfg.static_dir.as_deref());
    log::info!("listening on {}", cfg.bind);
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| ServiceError::Core(lexigraph_core::Error::io("serving", e)))
}
