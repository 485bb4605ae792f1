mod common;

use axum::http::StatusCode;
use common::*;
use lexigraph_service::fixtures::run_config;
use rust_decimal::Decimal;
use serde_json::{json, Value};

fn run_body(limit: Option<Decimal>) -> Value {
    serde_json::to_value(run_config(limit)).unwrap()
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn import_and_code_set_jobs_complete() {
    let env = Env::new();
    let app = env.app();
    let (status, v) = call(&app, "GET", "/health", None, None).await;
    assert_eq!((status, v["status"].as_str()), (StatusCode::OK, Some("ok")));
    let job = post_job(
        &app,
        "/terminologies/import",
        json!({ "name": "clinical", "path": env.path("terminology.tsv") }),
    )
    .await;
    assert_eq!(job["kind"], "terminology_import");
    assert_eq!(job["result"]["codes"], 12);
    assert_eq!(job["result"]["strings"], 17);
    assert_eq!(job["progress"], json!({ "done": 1, "total": 1 }));
    seed(&env, &app).await;
    let (status, cs) = call(&app, "GET", "/code-sets/infections", None, None).await;
    assert_eq!(status, StatusCode::OK);
    let members: Vec<&str> = cs["members"].as_array().unwrap().iter().map(|m| m["code_id"].as_str().unwrap()).collect();
    assert_eq!(members, ["J18", "L08", "N39"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn inline_rows_import() {
    let env = Env::new();
    let app = env.app();
    let rows = json!([
        { "code_id": "X1", "text": "alpha", "source_rank": 0 },
        { "code_id": "X1", "text": "alpha", "source_rank": 1 },
        { "code_id": "X2", "text": "beta", "source_rank": 0 },
    ]);
    let job = post_job(&app, "/terminologies/import", json!({ "name": "tiny", "rows": rows })).await;
    assert_eq!(job["result"]["codes"], 2);
    assert_eq!(job["result"]["duplicates"], 1);
    let job = post_job(&app, "/terminologies/import", json!({ "name": "neither" })).await;
    assert_eq!(job["status"], "failed");
    assert_eq!(job["error"]["kind"], "BadRequest");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn idempotency_key_returns_the_same_job() {
    let env = Env::new();
    let app = env.app();
    seed(&env, &app).await;
    let body = run_body(None);
    let (s1, a) = call(&app, "POST", "/runs", Some(body.clone()), Some("run-once")).await;
    let (s2, b) = call(&app, "POST", "/runs", Some(body.clone()), Some("run-once")).await;
    assert_eq!((s1, s2), (StatusCode::ACCEPTED, StatusCode::ACCEPTED));
    assert_eq!(a["id"], b["id"]);
    assert_eq!(a["run_id"], b["run_id"]);
    wait(&app, a["id"].as_str().unwrap()).await;
    let (_, c) = call(&app, "POST", "/runs", Some(body), Some("run-twice")).await;
    assert_ne!(c["run_id"], a["run_id"]);
    wait(&app, c["id"].as_str().unwrap()).await;
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn full_run_reports_progress_and_triples() {
    let env = Env::new();
    let app = env.app();
    seed(&env, &app).await;
    let job = post_job(&app, "/runs", run_body(None)).await;
    assert_eq!(job["status"], "completed", "{job}");
    assert_eq!(job["progress"], json!({ "done": 3, "total": 3 }));
    let report = &job["result"]["report"];
    assert_eq!(report["concepts_completed"], 3);
    assert_eq!(report["items_refined"], 2);
    assert!(job["result"]["log"].as_array().unwrap().len() > 3);
    let run_id = job["run_id"].as_str().unwrap();
    let (status, triples) = call(&app, "GET", &format!("/runs/{run_id}/triples"), None, None).await;
    assert_eq!(status, StatusCode::OK);
    let triples = triples.as_array().unwrap();
    assert_eq!(triples.len() as u64, report["triples_written"].as_u64().unwrap());
    let uti_meds: Vec<&str> = triples
        .iter()
        .filter(|t| t["subject_code_id"] == "N39" && t["predicate"] == "treated_by")
        .map(|t| t["object_value"].as_str().unwrap())
        .collect();
    assert!(uti_meds.contains(&"nitrofurantoin"), "{uti_meds:?}");
    assert!(!uti_meds.contains(&"antibiotics"), "{uti_meds:?}");
    let (_, run) = call(&app, "GET", &format!("/runs/{run_id}"), None, None).await;
    assert_eq!(run["run"]["status"], "completed");
    assert_eq!(run["job"]["id"], job["id"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn budget_limit_kills_the_run_and_keeps_partial_triples() {
    let env = Env::new();
    let app = env.app();
    seed(&env, &app).await;
    let job = post_job(&app, "/runs", run_body(Some(Decimal::new(1, 2)))).await;
    assert_eq!(job["status"], "killed_budget", "{job}");
    let report = &job["result"]["report"];
    assert_eq!(report["ledger"]["killed"], true);
    let cost: Decimal = report["ledger"]["accumulated_cost"].as_str().unwrap().parse().unwrap();
    assert!(cost > Decimal::new(1, 2));
    let completed = report["concepts_completed"].as_u64().unwrap();
    assert!(completed >= 1 && completed < 3, "{report}");
    assert_eq!(report["items_killed"].as_u64().unwrap(), 3 - completed);
    let run_id = job["run_id"].as_str().unwrap();
    let (_, triples) = call(&app, "GET", &format!("/runs/{run_id}/triples"), None, None).await;
    let n = triples.as_array().unwrap().len();
    assert!(n > 0);
    assert_eq!(n as u64, report["triples_written"].as_u64().unwrap());
    let (_, run) = call(&app, "GET", &format!("/runs/{run_id}"), None, None).await;
    assert_eq!(run["run"]["status"], "killed_budget");
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn matches_respect_n_and_batch_reuses() {
    let env = Env::new();
    let app = env.app();
    seed(&env, &app).await;
    let (status, v) = call(&app, "GET", "/matches?object=kidney%20infection&code_set=infections&n=2", None, None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    let results = v.as_array().unwrap();
    assert_eq!(results.len(), 1);
    assert!(results[0]["ranked"].as_array().unwrap().len() <= 2);
    let (_, v) = call(&app, "GET", "/matches?object=never%20seen", None, None).await;
    assert_eq!(v, json!([]));

    let run = post_job(&app, "/runs", run_body(None)).await;
    let body = json!({ "code_set": "infections", "run_id": run["run_id"], "n": 3, "z": 2.0 });
    let first = post_job(&app, "/matches/batch", body.clone()).await;
    assert_eq!(first["status"], "completed", "{first}");
    let computed = first["result"]["computed"].as_u64().unwrap();
    assert!(computed > 0);
    let second = post_job(&app, "/matches/batch", body).await;
    assert_eq!(second["result"]["computed"], 0);
    assert_eq!(second["result"]["reused"].as_u64().unwrap(), computed);
    for r in second["result"]["results"].as_array().unwrap() {
        assert!(r["ranked"].as_array().unwrap().len() <= 3);
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn custom_table_and_export() {
    let env = Env::new();
    let app = env.app();
    seed(&env, &app).await;
    let q = "SELECT DISTINCT code_id FROM codes WHERE code_id LIKE 'N%'";
    let job = post_job(&app, "/custom-tables", json!({ "name": "n_codes", "query": q })).await;
    assert_eq!(job["status"], "completed", "{job}");
    assert_eq!(job["result"]["rows"], 2);
    assert_eq!(job["result"]["version"], 1);
    let again = post_job(&app, "/custom-tables", json!({ "name": "n_codes", "query": q })).await;
    assert_eq!(again["result"]["version"], 2);
    let bad = post_job(&app, "/custom-tables", json!({ "name": "x", "query": "SELECT FROM" })).await;
    assert_eq!(bad["status"], "failed");
    assert_eq!(bad["error"]["kind"], "QueryError");

    let (_, hash) = call(&app, "GET", "/export/hash", None, None).await;
    assert_eq!(hash["hash"].as_str().unwrap().len(), 64);
    let (status, export) = call(&app, "GET", "/export", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(export["custom_tables"].as_array().unwrap().len(), 2, "{}", export["custom_tables"]);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn errors_carry_kind_and_status() {
    let env = Env::new();
    let app = env.app();
    let (status, v) = call(&app, "GET", "/jobs/job-999", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "NotFound");
    let (status, v) = call(&app, "GET", "/code-sets/nope", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"]["kind"], "NotFound");
    let (status, v) = call(&app, "POST", "/runs", Some(run_body(None)), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND, "{v}");
    let (status, v) = call(&app, "POST", "/matches/batch", Some(json!({ "code_set": "x", "z": -1.0, "n": 2 })), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST, "{v}");
    assert!(v["error"]["kind"].is_string());
    let (status, _) = call(&app, "GET", "/matches?object=a&code_set=nope", None, None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn static_directory_is_served() {
    let mut env = Env::new();
    let www = env.path("www");
    std::fs::create_dir_all(&www).unwrap();
    std::fs::write(www.join("index.html"), "<!doctype html><title>t</title>").unwrap();
    env.cfg.static_dir = Some(www);
    let app = env.app();
    let (status, body) = call(&app, "GET", "/index.html", None, None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(body.as_str().unwrap().contains("<title>t</title>"));
}
