//! JSON-over-HTTP front end.
//!
//! Design and prediction routes are pure functions of the request body.
//! Device routes queue jobs on the [`JobService`] and return immediately;
//! clients poll `GET /jobs/{id}`.

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use mixel_core::interaction::{
    classify, interaction_map_with, ForceModel, Interaction, Normalization, DEFAULT_EPSILON,
};
use mixel_core::io::{load_pattern, map_to_value, pattern_from_value, pattern_value, Metadata};
use mixel_core::pairs::{canvas_compile, generate_pair_set, PairMode};
use mixel_core::pattern::{complement, orthogonality_defect, HadamardSpec, Permutation, PixelGrid};
use mixel_core::Error;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::jobs::JobService;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let message = self.to_string();
        let (status, kind, extra) = match &self {
            ServiceError::NotFound(_) => (StatusCode::NOT_FOUND, "not_found", json!({})),
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad_request", json!({})),
            ServiceError::Timeout(_) => (StatusCode::GATEWAY_TIMEOUT, "timeout", json!({})),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal", json!({})),
            ServiceError::Core(e) => match e {
                Error::Parse { line, column, .. } => (
                    StatusCode::BAD_REQUEST,
                    "parse",
                    json!({ "line": line, "column": column }),
                ),
                Error::Validation { row, col, value } => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "validation",
                    json!({ "row": row, "col": col, "value": value }),
                ),
                Error::Shape(_) => (StatusCode::UNPROCESSABLE_ENTITY, "shape", json!({})),
                Error::Schema(_) => (StatusCode::UNPROCESSABLE_ENTITY, "schema", json!({})),
                Error::UnsupportedVersion(_) => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "unsupported_version",
                    json!({}),
                ),
                Error::OutOfRange(_) => {
                    (StatusCode::UNPROCESSABLE_ENTITY, "out_of_range", json!({}))
                }
                Error::Io(_) => (StatusCode::INTERNAL_SERVER_ERROR, "io", json!({})),
                _ => (
                    StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_argument",
                    json!({}),
                ),
            },
        };
        let mut body = json!({ "kind": kind, "message": message });
        if let (Some(b), Some(x)) = (body.as_object_mut(), extra.as_object()) {
            b.extend(x.clone());
        }
        (status, Json(json!({ "error": body }))).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ServiceError>;

pub fn router(service: JobService) -> Router {
    Router::new()
        .route("/patterns/validate", post(validate))
        .route("/design/hadamard", post(hadamard))
        .route("/design/pairs", post(pairs))
        .route("/design/canvas", post(canvas))
        .route("/predict/map", post(predict_map))
        .route("/predict/force", post(predict_force))
        .route("/devices/{id}/plot", post(plot))
        .route("/devices/{id}/scan", post(scan))
        .route("/devices/{id}/sheet", get(sheet))
        .route("/jobs/{id}", get(job))
        .with_state(service)
}

fn doc(grid: &PixelGrid, name: &str) -> Value {
    pattern_value(
        grid,
        &Metadata::from([("name".to_string(), name.to_string())]),
    )
}

/// Accepts either a pattern document or a string holding one.
fn grid(v: &Value) -> Result<PixelGrid, ServiceError> {
    let (g, _) = match v {
        Value::String(text) => load_pattern(text)?,
        other => pattern_from_value(other)?,
    };
    Ok(g)
}

async fn validate(Json(body): Json<Value>) -> ApiResult {
    let g = grid(&body)?;
    Ok(Json(json!({
        "valid": true,
        "rows": g.rows(),
        "cols": g.cols(),
        "masked": g.masked_count(),
        "binary": g.is_binary(),
    })))
}

#[derive(Deserialize)]
struct HadamardRequest {
    order: usize,
    row_permutation: Option<Vec<usize>>,
}

async fn hadamard(Json(req): Json<HadamardRequest>) -> ApiResult {
    let spec = match req.row_permutation {
        Some(p) => HadamardSpec::new(req.order, Permutation::new(p)?)?,
        None => HadamardSpec::sylvester(req.order)?,
    };
    let key = spec.build()?;
    Ok(Json(json!({
        "key": doc(&key, "key"),
        "lock": doc(&complement(&key), "lock"),
        "orthogonality_defect": orthogonality_defect(&key)?,
    })))
}

#[derive(Deserialize)]
struct PairsRequest {
    k: usize,
    order: usize,
    candidates: usize,
    #[serde(default)]
    seed: u64,
    #[serde(default = "attract")]
    mode: PairMode,
}

fn attract() -> PairMode {
    PairMode::Attract
}

async fn pairs(Json(req): Json<PairsRequest>) -> ApiResult {
    let set = tokio::task::spawn_blocking(move || {
        generate_pair_set(req.k, req.order, req.candidates, req.mode, req.seed)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    let pairs: Vec<Value> = set
        .pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            json!({
                "permutation": p.permutation,
                "key": doc(&p.key, &format!("pair {i} key")),
                "lock": doc(&p.lock, &format!("pair {i} lock")),
            })
        })
        .collect();
    Ok(Json(json!({
        "score": set.score,
        "mean_off_target": set.mean_off_target,
        "mode": set.mode,
        "seed": set.seed,
        "pairs": pairs,
    })))
}

#[derive(Deserialize)]
struct CanvasRequest {
    token: Value,
    layout: Vec<Vec<Interaction>>,
}

async fn canvas(Json(req): Json<CanvasRequest>) -> ApiResult {
    let token = grid(&req.token)?;
    let layout = canvas_compile(&token, &req.layout)?;
    let mut block_ncc = Vec::with_capacity(layout.meta_rows);
    for r in 0..layout.meta_rows {
        let row = (0..layout.meta_cols)
            .map(|c| layout.measure_block(r, c))
            .collect::<mixel_core::Result<Vec<f64>>>()?;
        block_ncc.push(row);
    }
    Ok(Json(json!({
        "canvas": doc(&layout.canvas, "canvas"),
        "assignments": req.layout,
        "block_ncc": block_ncc,
    })))
}

#[derive(Deserialize)]
struct MapRequest {
    a: Value,
    b: Value,
    #[serde(default)]
    normalization: Normalization,
}

async fn predict_map(Json(req): Json<MapRequest>) -> ApiResult {
    let (a, b) = (grid(&req.a)?, grid(&req.b)?);
    let map = interaction_map_with(&a, &b, req.normalization)?;
    let mut out = map_to_value(&map);
    let aligned = map.get(0, 0).unwrap_or(0.0);
    out["aligned"] = json!({
        "ncc": aligned,
        "interaction": classify(aligned, DEFAULT_EPSILON),
    });
    Ok(Json(out))
}

#[derive(Deserialize)]
struct ForceRequest {
    a: Value,
    b: Value,
    #[serde(default)]
    dx: i64,
    #[serde(default)]
    dy: i64,
}

async fn predict_force(Json(req): Json<ForceRequest>) -> ApiResult {
    let (a, b) = (grid(&req.a)?, grid(&req.b)?);
    let map = interaction_map_with(&a, &b, Normalization::Overlap)?;
    let ncc = map.get(req.dx, req.dy).ok_or_else(|| {
        ServiceError::Core(Error::OutOfRange(format!(
            "no overlap at ({}, {})",
            req.dx, req.dy
        )))
    })?;
    let f = ForceModel::default().between(&a, &b, req.dx, req.dy)?;
    Ok(Json(json!({
        "ncc": ncc,
        "overlap": map.overlap_at(req.dx, req.dy),
        "newtons": f.newtons,
        "interaction": classify(ncc, DEFAULT_EPSILON),
    })))
}

#[derive(Deserialize)]
struct PlotRequest {
    pattern: Value,
}

async fn plot(
    State(svc): State<JobService>,
    Path(id): Path<String>,
    Json(req): Json<PlotRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let job = svc.submit_plot(&id, grid(&req.pattern)?)?;
    Ok((StatusCode::ACCEPTED, Json(json!(job))))
}

#[derive(Deserialize)]
struct ScanRequest {
    rows: usize,
    cols: usize,
}

async fn scan(
    State(svc): State<JobService>,
    Path(id): Path<String>,
    Json(req): Json<ScanRequest>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let job = svc.submit_scan(&id, req.rows, req.cols)?;
    Ok((StatusCode::ACCEPTED, Json(json!(job))))
}

async fn sheet(State(svc): State<JobService>, Path(id): Path<String>) -> ApiResult {
    Ok(Json(doc(&svc.sheet(&id)?, &format!("device {id}"))))
}

async fn job(State(svc): State<JobService>, Path(id): Path<String>) -> ApiResult {
    let id: u64 = id
        .parse()
        .map_err(|_| ServiceError::NotFound(format!("job {id}")))?;
    Ok(Json(json!(svc.job_status(id)?)))
}
