use std::time::Duration;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use mixel_core::io::{pattern_from_value, pattern_value, Metadata};
use mixel_core::pattern::{complement, sylvester_hadamard, PixelGrid};
use mixel_service::{router, DeviceConfig, JobService, ServiceConfig};
use serde_json::{json, Value};
use tower::ServiceExt;

fn app() -> Router {
    let svc = JobService::new(ServiceConfig::default());
    svc.add_device(
        "sim",
        DeviceConfig {
            rows: 8,
            cols: 8,
            seed: 3,
            ..DeviceConfig::default()
        },
    )
    .unwrap();
    router(svc)
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map_or_else(Body::empty, |b| Body::from(b.to_string())))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (
        status,
        serde_json::from_slice(&bytes).unwrap_or(Value::Null),
    )
}

fn doc(g: &PixelGrid) -> Value {
    pattern_value(g, &Metadata::new())
}

async fn finish(app: &Router, id: &Value) -> Value {
    for _ in 0..2000 {
        let (status, job) = call(app, "GET", &format!("/jobs/{id}"), None).await;
        assert_eq!(status, StatusCode::OK);
        if job["state"] == "done" || job["state"] == "failed" {
            return job;
        }
        tokio::time::sleep(Duration::from_millis(5)).await;
    }
    panic!("job {id} did not finish");
}

#[tokio::test]
async fn validate_reports_errors() {
    let app = app();
    let (s, v) = call(
        &app,
        "POST",
        "/patterns/validate",
        Some(doc(&sylvester_hadamard(4).unwrap())),
    )
    .await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["masked"], 16);

    let bad = json!({"format_version": 1, "rows": 1, "cols": 2, "values": [[1, 1.5]]});
    let (s, v) = call(&app, "POST", "/patterns/validate", Some(bad)).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"]["kind"], "validation");
    assert_eq!(
        (v["error"]["row"].clone(), v["error"]["col"].clone()),
        (json!(0), json!(1))
    );

    let (s, v) = call(
        &app,
        "POST",
        "/patterns/validate",
        Some(json!("{\n\"rows\": ]")),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["line"], 2);

    let v99 = json!({"format_version": 99, "rows": 1, "cols": 1, "values": [[1]]});
    let (_, v) = call(&app, "POST", "/patterns/validate", Some(v99)).await;
    assert_eq!(v["error"]["kind"], "unsupported_version");
}

#[tokio::test]
async fn design_endpoints() {
    let app = app();
    let (s, v) = call(&app, "POST", "/design/hadamard", Some(json!({"order": 2}))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["key"]["values"], json!([[1, 1], [1, -1]]));
    assert_eq!(v["lock"]["values"], json!([[-1, -1], [-1, 1]]));
    let (s, _) = call(&app, "POST", "/design/hadamard", Some(json!({"order": 6}))).await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);

    let req = json!({"k": 3, "order": 8, "candidates": 64, "seed": 1});
    let (s, v) = call(&app, "POST", "/design/pairs", Some(req.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["pairs"].as_array().unwrap().len(), 3);
    assert!(v["score"].as_f64().unwrap() <= 0.5);
    assert_eq!(call(&app, "POST", "/design/pairs", Some(req)).await.1, v);

    let canvas = json!({
        "token": doc(&sylvester_hadamard(4).unwrap()),
        "layout": [["attract", "agnostic"], ["repel", "attract"]],
    });
    let (s, v) = call(&app, "POST", "/design/canvas", Some(canvas)).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["block_ncc"], json!([[-1.0, 0.0], [1.0, -1.0]]));
    assert_eq!(v["canvas"]["rows"], 8);
}

#[tokio::test]
async fn prediction_endpoints() {
    let app = app();
    let h = sylvester_hadamard(8).unwrap();
    let body = json!({"a": doc(&h), "b": doc(&complement(&h))});
    let (s, v) = call(&app, "POST", "/predict/map", Some(body.clone())).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(v["origin"], json!({"dx": -7, "dy": -7}));
    assert_eq!(v["ncc"][7][7], -1.0);
    for k in 0..15 {
        if k != 7 {
            assert_eq!(v["ncc"][7][k], 0.0);
            assert_eq!(v["ncc"][k][7], 0.0);
        }
    }
    assert_eq!(v["aligned"]["interaction"], "attract");

    let (s, v) = call(&app, "POST", "/predict/force", Some(body)).await;
    assert_eq!(s, StatusCode::OK);
    assert!((v["newtons"].as_f64().unwrap() + 1.09).abs() < 1e-9);
    assert_eq!(v["overlap"], 64);
}

#[tokio::test]
async fn plot_then_scan_over_http() {
    let app = app();
    let h4 = sylvester_hadamard(4).unwrap();
    let (s, job) = call(
        &app,
        "POST",
        "/devices/sim/plot",
        Some(json!({"pattern": doc(&h4)})),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    assert_eq!(job["state"], "queued");
    let done = finish(&app, &job["id"]).await;
    assert_eq!(done["result"]["pixels_written"], 16);

    let (_, sheet) = call(&app, "GET", "/devices/sim/sheet", None).await;
    let (sheet, _) = pattern_from_value(&sheet).unwrap();
    assert_eq!(sheet.block(0, 0, 4, 4).unwrap(), h4);

    let (s, job) = call(
        &app,
        "POST",
        "/devices/sim/scan",
        Some(json!({"rows": 4, "cols": 4})),
    )
    .await;
    assert_eq!(s, StatusCode::ACCEPTED);
    let done = finish(&app, &job["id"]).await;
    let (scanned, _) = pattern_from_value(&done["result"]).unwrap();
    assert_eq!(scanned, h4);
}

#[tokio::test]
async fn not_found_and_bad_requests() {
    let app = app();
    assert_eq!(
        call(&app, "GET", "/jobs/12345", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "GET", "/jobs/abc", None).await.0,
        StatusCode::NOT_FOUND
    );
    assert_eq!(
        call(&app, "GET", "/devices/nope/sheet", None).await.0,
        StatusCode::NOT_FOUND
    );
    let (s, v) = call(
        &app,
        "POST",
        "/devices/sim/scan",
        Some(json!({"rows": 0, "cols": 0})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert_eq!(v["error"]["kind"], "bad_request");
    let (s, _) = call(
        &app,
        "POST",
        "/devices/sim/scan",
        Some(json!({"rows": 9, "cols": 9})),
    )
    .await;
    assert_eq!(s, StatusCode::UNPROCESSABLE_ENTITY);
}
