use std::path::PathBuf;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use geosieve::geo::AreaReport;
use geosieve::scenario::{load_scenario, Scenario};
use geosieve::BitMask;
use serde::{Deserialize, Serialize};

use crate::cache::MaskCache;
use crate::query::{self, EvalRequest, QueryError};
use crate::render;

/// Shared service state. The scenario is replaced whole on reload.
#[derive(Default)]
pub struct AppState {
    scenario: RwLock<Option<Arc<Scenario>>>,
    cache: Mutex<MaskCache>,
}

impl AppState {
    pub fn new(scenario: Option<Scenario>) -> Arc<Self> {
        Arc::new(AppState {
            scenario: RwLock::new(scenario.map(Arc::new)),
            cache: Mutex::default(),
        })
    }

    pub fn scenario(&self) -> Option<Arc<Scenario>> {
        self.scenario.read().expect("scenario lock").clone()
    }

    pub fn set_scenario(&self, s: Scenario) {
        *self.scenario.write().expect("scenario lock") = Some(Arc::new(s));
        self.cache.lock().expect("cache lock").clear();
    }

    fn cached(&self, key: &str) -> Option<Arc<BitMask>> {
        self.cache.lock().expect("cache lock").get(key)
    }

    fn store(&self, key: String, mask: Arc<BitMask>) {
        self.cache.lock().expect("cache lock").insert(key, mask);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResponse {
    pub mask_id: String,
    pub report: AreaReport,
    pub expr_canonical: String,
    pub eval_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandInfo {
    pub name: String,
    pub min: Option<f32>,
    pub max: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolygonInfo {
    pub id: String,
    /// Polygons, each a list of rings of `[easting, northing]`.
    pub polygons: Vec<Vec<Vec<[f64; 2]>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraInfo {
    pub id: String,
    pub published: [f64; 2],
    pub radius_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioInfo {
    pub width: usize,
    pub height: usize,
    pub origin: [f64; 2],
    pub pixel_size: f64,
    pub anchor: [f64; 2],
    pub bands: Vec<String>,
    pub polygons: Vec<String>,
    pub cameras: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadRequest {
    pub manifest: PathBuf,
}

/// Error body. Parse and type errors carry their position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub kind: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub col: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expected: Option<Vec<String>>,
}

pub struct ApiError {
    status: StatusCode,
    body: Box<ErrorBody>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: Box::new(ErrorBody {
                kind: kind.into(),
                message: message.into(),
                offset: None,
                line: None,
                col: None,
                expected: None,
            }),
        }
    }

    fn no_scenario() -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "scenario",
            "no scenario loaded; POST /scenario first",
        )
    }

    fn not_found(what: impl Into<String>) -> Self {
        ApiError::new(StatusCode::NOT_FOUND, "not_found", what)
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::TooLarge(_) => ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "too_large", e.to_string()),
            QueryError::Parse(p) => {
                let mut err = ApiError::new(StatusCode::BAD_REQUEST, "parse", p.message.clone());
                err.body.offset = Some(p.offset);
                err.body.line = Some(p.line);
                err.body.col = Some(p.col);
                err.body.expected = Some(p.expected);
                err
            }
            QueryError::Eval(e) => {
                let kind = match e {
                    geosieve::Error::Name { .. } => "name",
                    _ => "eval",
                };
                ApiError::new(StatusCode::BAD_REQUEST, kind, e.to_string())
            }
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn current(state: &AppState) -> ApiResult<Arc<Scenario>> {
    state.scenario().ok_or_else(ApiError::no_scenario)
}

fn png(bytes: Vec<u8>) -> Response {
    ([(header::CONTENT_TYPE, "image/png")], bytes).into_response()
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/scenario", get(scenario_info).post(load))
        .route("/bands", get(bands))
        .route("/polygons", get(polygons))
        .route("/cameras", get(cameras))
        .route("/eval", post(eval))
        .route("/mask/{file}", get(mask))
        .route("/preview/{file}", get(preview))
        .with_state(state)
}

fn info(s: &Scenario) -> ScenarioInfo {
    let gt = s.stack.geotransform();
    ScenarioInfo {
        width: s.stack.width(),
        height: s.stack.height(),
        origin: [gt.origin_easting, gt.origin_northing],
        pixel_size: gt.pixel_size,
        anchor: [s.anchor.0, s.anchor.1],
        bands: s.stack.band_names().to_vec(),
        polygons: s.polygons.keys().cloned().collect(),
        cameras: s.cameras.iter().map(|c| c.id.clone()).collect(),
    }
}

async fn scenario_info(State(state): State<Arc<AppState>>) -> ApiResult<Json<ScenarioInfo>> {
    Ok(Json(info(&*current(&state)?)))
}

async fn load(State(state): State<Arc<AppState>>, Json(req): Json<LoadRequest>) -> ApiResult<Json<ScenarioInfo>> {
    let loaded = tokio::task::spawn_blocking(move || load_scenario(&req.manifest))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| ApiError::new(StatusCode::BAD_REQUEST, "scenario", e.to_string()))?;
    let out = info(&loaded);
    state.set_scenario(loaded);
    Ok(Json(out))
}

async fn bands(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<BandInfo>>> {
    let s = current(&state)?;
    let out = s
        .stack
        .bands()
        .map(|(name, g)| {
            let mm = g.min_max();
            BandInfo {
                name: name.to_string(),
                min: mm.map(|m| m.0),
                max: mm.map(|m| m.1),
            }
        })
        .collect();
    Ok(Json(out))
}

async fn polygons(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<PolygonInfo>>> {
    let s = current(&state)?;
    let out = s
        .polygons
        .iter()
        .map(|(id, mp)| PolygonInfo {
            id: id.clone(),
            polygons: mp
                .0
                .iter()
                .map(|p| p.rings().map(|r| r.iter().map(|&(e, n)| [e, n]).collect()).collect())
                .collect(),
        })
        .collect();
    Ok(Json(out))
}

async fn cameras(State(state): State<Arc<AppState>>) -> ApiResult<Json<Vec<CameraInfo>>> {
    let s = current(&state)?;
    let out = s
        .cameras
        .iter()
        .map(|c| CameraInfo {
            id: c.id.clone(),
            published: [c.published_location.0, c.published_location.1],
            radius_m: c.obfuscation_radius,
        })
        .collect();
    Ok(Json(out))
}

async fn eval(State(state): State<Arc<AppState>>, Json(req): Json<EvalRequest>) -> ApiResult<Json<EvalResponse>> {
    let s = current(&state)?;
    let start = Instant::now();
    let prepared = query::prepare(&s, &req)?;
    let mask = match state.cached(&prepared.key) {
        Some(m) => m,
        None => {
            let (s2, p2) = (s.clone(), prepared.clone());
            let m = tokio::task::spawn_blocking(move || query::evaluate(&s2, &p2))
                .await
                .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))??;
            let m = Arc::new(m);
            state.store(prepared.key.clone(), m.clone());
            m
        }
    };
    let report = query::report(&s, &mask)?;
    Ok(Json(EvalResponse {
        mask_id: prepared.key,
        report,
        expr_canonical: prepared.canonical,
        eval_ms: start.elapsed().as_secs_f64() * 1e3,
    }))
}

async fn mask(State(state): State<Arc<AppState>>, Path(file): Path<String>) -> ApiResult<Response> {
    current(&state)?;
    let id = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::not_found(file.clone()))?;
    let m = state
        .cached(id)
        .ok_or_else(|| ApiError::not_found(format!("unknown or evicted mask `{id}`")))?;
    Ok(png(tokio::task::spawn_blocking(move || render::mask_png(&m))
        .await
        .expect("render task")))
}

async fn preview(State(state): State<Arc<AppState>>, Path(file): Path<String>) -> ApiResult<Response> {
    let s = current(&state)?;
    let band = file
        .strip_suffix(".png")
        .ok_or_else(|| ApiError::not_found(file.clone()))?;
    if s.stack.band(band).is_err() {
        return Err(ApiError::not_found(format!("unknown band `{band}`")));
    }
    let band = band.to_string();
    let bytes = tokio::task::spawn_blocking(move || render::band_png(s.stack.band(&band).expect("checked")))
        .await
        .expect("render task");
    Ok(png(bytes))
}
