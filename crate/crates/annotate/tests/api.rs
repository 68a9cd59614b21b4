use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use sentqual_annotate::{forbidden_keys_in, router, Study, StudySettings};
use sentqual_core::diff_revisions;
use sentqual_core::eval::{SampleEntry, Stratum, StudySample};

fn sample(n: usize) -> StudySample {
    StudySample {
        seed: 3,
        diffs: (0..n)
            .map(|i| {
                let mut diff = diff_revisions(
                    &format!("Item {i} was built."),
                    &format!("Item {i} was built in 1900.<ref>Town history</ref>"),
                    "add source per POV note by Alice",
                );
                diff.page_id = 50 + i as u64;
                diff.old_rev_id = 1000 + i as u64;
                diff.new_rev_id = 2000 + i as u64;
                SampleEntry {
                    diff_id: format!("d{i:02}"),
                    stratum: Stratum::Remainder,
                    labels: BTreeSet::from([sentqual_core::Category::Citation]),
                    diff,
                }
            })
            .collect(),
    }
}

fn app(study: Study) -> Router {
    router(Arc::new(Mutex::new(study)))
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
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes).unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    // nothing the service returns may leak edit metadata
    if uri.contains("/next") {
        assert!(forbidden_keys_in(&value).is_empty(), "{value}");
        assert!(!value.to_string().contains("Alice"));
    }
    (status, value)
}

async fn open(app: &Router, annotator: &str) -> String {
    let (status, v) = call(app, "GET", &format!("/api/session?annotator={annotator}"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

async fn label(app: &Router, sid: &str, diff_id: &str) -> (StatusCode, Value) {
    call(
        app,
        "POST",
        &format!("/api/session/{sid}/labels"),
        Some(json!({"diff_id": diff_id, "categories": ["citation"]})),
    )
    .await
}

async fn next_id(app: &Router, sid: &str) -> Option<String> {
    let (status, v) = call(app, "GET", &format!("/api/session/{sid}/next"), None).await;
    assert_eq!(status, StatusCode::OK);
    match v["status"].as_str().unwrap() {
        "diff" => Some(v["diff"]["diff_id"].as_str().unwrap().to_string()),
        _ => None,
    }
}

#[tokio::test]
async fn session_flow_and_errors() {
    let app = app(Study::new(sample(3), StudySettings::default()));
    let (status, _) = call(&app, "GET", "/api/session?annotator=", None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    let sid = open(&app, "ann1").await;
    assert_eq!(open(&app, "ann1").await, sid);

    let (_, first) = call(&app, "GET", &format!("/api/session/{sid}/next"), None).await;
    assert_eq!(first["status"], "diff");
    assert_eq!(first["practice"], true);
    let (status, ack) = label(&app, &sid, "practice").await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(ack["submitted_count"], 0);

    let d = next_id(&app, &sid).await.unwrap();
    assert_eq!(next_id(&app, &sid).await.unwrap(), d, "reload serves the same diff");

    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/session/{sid}/labels"),
        Some(json!({"diff_id": d, "categories": [], "none_flag": false})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, _) = call(
        &app,
        "POST",
        &format!("/api/session/{sid}/labels"),
        Some(json!({"diff_id": d, "categories": ["pov"], "none_flag": true})),
    )
    .await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(label(&app, &sid, &d).await.0, StatusCode::OK);
    assert_eq!(label(&app, &sid, &d).await.0, StatusCode::CONFLICT);

    let (status, _) = call(&app, "GET", "/api/session/nope/next", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(label(&app, "nope", &d).await.0, StatusCode::NOT_FOUND);

    let (status, defs) = call(&app, "GET", "/api/definitions", None).await;
    assert_eq!(status, StatusCode::OK);
    let cats: Vec<&str> = defs.as_array().unwrap().iter().map(|d| d["category"].as_str().unwrap()).collect();
    assert_eq!(cats, vec!["citation", "point_of_view", "clarification"]);
}

#[tokio::test]
async fn three_annotators_cover_sample_and_replay_matches() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("labels.jsonl");
    let app1 = app(Study::new(sample(20), StudySettings::default()).with_log(&log).unwrap());
    for name in ["a", "b", "c"] {
        let sid = open(&app1, name).await;
        assert_eq!(next_id(&app1, &sid).await.as_deref(), Some("practice"));
        label(&app1, &sid, "practice").await;
        let mut count = 0;
        while let Some(d) = next_id(&app1, &sid).await {
            assert_eq!(label(&app1, &sid, &d).await.0, StatusCode::OK);
            count += 1;
        }
        assert_eq!(count, 20);
    }
    let (_, metrics) = call(&app1, "GET", "/api/metrics", None).await;
    assert_eq!(metrics["coverage"]["ground_truth"], 20);
    assert_eq!(metrics["coverage"]["annotations"], 60);
    assert_eq!(metrics["summary"], "20 of 20 labeled");
    assert_eq!(metrics["rules"]["citation"]["precision"], 1.0);

    let app2 = app(Study::new(sample(20), StudySettings::default()).with_log(&log).unwrap());
    let (_, replayed) = call(&app2, "GET", "/api/metrics", None).await;
    assert_eq!(replayed, metrics);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 4)]
async fn concurrent_annotators_never_share_or_lose_labels() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("labels.jsonl");
    let app = app(Study::new(sample(30), StudySettings::default()).with_log(&log).unwrap());
    let mut tasks = Vec::new();
    for k in 0..8 {
        let app = app.clone();
        tasks.push(tokio::spawn(async move {
            let sid = open(&app, &format!("ann{k}")).await;
            next_id(&app, &sid).await;
            label(&app, &sid, "practice").await;
            let mut labeled = Vec::new();
            let mut waits = 0;
            while labeled.len() < 30 && waits < 10_000 {
                let (_, v) = call(&app, "GET", &format!("/api/session/{sid}/next"), None).await;
                match v["status"].as_str().unwrap() {
                    "diff" => {
                        let d = v["diff"]["diff_id"].as_str().unwrap().to_string();
                        assert_eq!(label(&app, &sid, &d).await.0, StatusCode::OK);
                        labeled.push(d);
                    }
                    "wait" => {
                        waits += 1;
                        tokio::task::yield_now().await;
                    }
                    _ => break,
                }
            }
            labeled
        }));
    }
    let mut total = 0;
    for t in tasks {
        let labeled = t.await.unwrap();
        let unique: BTreeSet<_> = labeled.iter().collect();
        assert_eq!(unique.len(), labeled.len(), "an annotator saw a diff twice");
        total += labeled.len();
    }
    assert_eq!(total, 8 * 30);
    let lines = std::fs::read_to_string(&log).unwrap().lines().count();
    assert_eq!(lines, total + 8, "every label plus one practice per annotator is logged");
}
