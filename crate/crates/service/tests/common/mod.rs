#![allow(dead_code)]

use std::path::PathBuf;
use std::time::{Duration, Instant};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use lexigraph_core::Workbench;
use lexigraph_service::fixtures::INFECTIONS_FILTER;
use lexigraph_service::http::{router, AppState, IDEMPOTENCY_HEADER};
use lexigraph_service::ServiceConfig;
use serde_json::{json, Value};
use tempfile::TempDir;
use tower::ServiceExt;

/// Example files in a temp dir plus the settings loaded from them. The
/// store stays in memory unless a test sets `store_path`.
pub struct Env {
    pub dir: TempDir,
    pub cfg: ServiceConfig,
}

impl Env {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        lexigraph_service::fixtures::write_examples(dir.path()).unwrap();
        let mut cfg = ServiceConfig::from_file(&dir.path().join("settings.toml")).unwrap();
        cfg.workbench.store_path = None;
        Env { dir, cfg }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    pub fn app(&self) -> Router {
        let wb = Workbench::open(self.cfg.workbench.clone()).unwrap();
        router(AppState::new(wb), self.cfg.static_dir.as_deref())
    }

    pub fn settings(&self) -> String {
        self.path("settings.toml").display().to_string()
    }

    /// Runs the CLI in process against this env's settings file.
    pub fn cli(&self, args: &[&str]) -> (i32, String, String) {
        let settings = self.settings();
        let mut argv = vec!["lexigraph", "--settings", settings.as_str()];
        argv.extend_from_slice(args);
        cli(&argv)
    }
}

pub fn cli(argv: &[&str]) -> (i32, String, String) {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = lexigraph_service::cli::main_with(argv.iter().copied(), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

pub async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>, key: Option<&str>) -> (StatusCode, Value) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(k) = key {
        req = req.header(IDEMPOTENCY_HEADER, k);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string()))
            .unwrap(),
        None => req.body(Body::empty()).unwrap(),
    };
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let v = serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()));
    (status, v)
}

/// Polls a job until it reaches a terminal state.
pub async fn wait(app: &Router, job_id: &str) -> Value {
    let start = Instant::now();
    loop {
        let (status, job) = call(app, "GET", &format!("/jobs/{job_id}"), None, None).await;
        assert_eq!(status, StatusCode::OK, "{job}");
        if matches!(job["status"].as_str(), Some("completed" | "killed_budget" | "failed")) {
            return job;
        }
        assert!(start.elapsed() < Duration::from_secs(30), "job {job_id} stuck: {job}");
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
}

/// POSTs, expects 202 and waits for the job.
pub async fn post_job(app: &Router, uri: &str, body: Value) -> Value {
    let (status, job) = call(app, "POST", uri, Some(body), None).await;
    assert_eq!(status, StatusCode::ACCEPTED, "{job}");
    wait(app, job["id"].as_str().unwrap()).await
}

/// Imports the example terminology and creates the `infections` code set.
pub async fn seed(env: &Env, app: &Router) {
    let job = post_job(
        app,
        "/terminologies/import",
        json!({ "name": "clinical", "path": env.path("terminology.tsv") }),
    )
    .await;
    assert_eq!(job["status"], "completed", "{job}");
    let job = post_job(
        app,
        "/code-sets",
        json!({ "terminology": "clinical", "name": "infections", "filter": INFECTIONS_FILTER }),
    )
    .await;
    assert_eq!(job["status"], "completed", "{job}");
}

/// The same setup through the CLI.
pub fn seed_cli(env: &Env) {
    let tsv = env.path("terminology.tsv").display().to_string();
    let (code, _, err) = env.cli(&["import-terminology", "--name", "clinical", "--file", &tsv]);
    assert_eq!(code, 0, "{err}");
    let (code, _, err) = env.cli(&[
        "create-code-set",
        "--terminology",
        "clinical",
        "--name",
        "infections",
        "--filter",
        INFECTIONS_FILTER,
    ]);
    assert_eq!(code, 0, "{err}");
}
