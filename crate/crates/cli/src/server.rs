//! HTTP API for the sketching loop.
//!
//! One in-memory session per server. Mutating requests (sketch, delete,
//! fit, solve) take the session's writer lock for their whole duration, so
//! they run one at a time; reads only take the state lock briefly. Training
//! and solving run on the blocking pool.
//!
//! | method | path | |
//! |---|---|---|
//! | GET | `/api/scene` | camera, image size, limits, phase, sketches |
//! | GET | `/api/scene/image` | depth rendering as PNG |
//! | POST | `/api/sketch` | `{label, vertices: [[u, v], ...]}` |
//! | DELETE | `/api/sketch/{id}` | |
//! | POST | `/api/fit` | optional `{epochs, seed, preview_step}` |
//! | POST | `/api/solve` | optional `{restarts, seed, iterations, samples, step_size, tau}` |
//! | GET | `/api/result/{id}` | a cached solve result |

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use sdi_core::nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sdi_core::datasets::SceneSpec;
use sdi_core::eval::{fit_scene_models, placement_region, SceneModels};
use sdi_core::kinematics::{BaseConfig, KinematicChain};
use sdi_core::sim::sigmoid;
use sdi_core::solver::{solve_multistart, SolverConfig};
use sdi_core::{CameraModel, EnergyFunction, Label, Sketch, TrainConfig};

use crate::args::ServeArgs;
use crate::exit::{classify, CliError, CliResult, ExitCode};
use crate::image::depth_png;
use crate::manifest::RunManifest;
use crate::scene::{load_chain_arg, load_scene};

pub const DEFAULT_PREVIEW_STEP: usize = 8;
pub const DEFAULT_RESTARTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    SceneLoaded,
    Sketched,
    Fitted,
    Solved,
}

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub train: TrainConfig,
    pub constraint_padding: f64,
    pub chain: KinematicChain,
    pub seed: u64,
}

struct Session {
    scene: SceneSpec,
    sketches: BTreeMap<u64, Sketch>,
    next_sketch: u64,
    phase: Phase,
    models: Option<Arc<SceneModels>>,
    results: BTreeMap<u64, Arc<serde_json::Value>>,
    next_result: u64,
    latest: Option<u64>,
}

impl Session {
    fn scene_with_sketches(&self) -> SceneSpec {
        SceneSpec { sketches: self.sketches.values().cloned().collect(), ..self.scene.clone() }
    }

    /// Any sketch change invalidates fitted models.
    fn resketched(&mut self) {
        self.models = None;
        self.latest = None;
        self.phase = if self.sketches.is_empty() { Phase::SceneLoaded } else { Phase::Sketched };
    }
}

pub struct AppState {
    session: RwLock<Session>,
    writer: tokio::sync::Mutex<()>,
    config: SessionConfig,
}

pub type SharedState = Arc<AppState>;

/// Session over `scene`; its own sketches are kept unless `blank`.
pub fn new_state(scene: SceneSpec, blank: bool, config: SessionConfig) -> SharedState {
    let mut sketches = BTreeMap::new();
    if !blank {
        for (i, s) in scene.sketches.iter().enumerate() {
            sketches.insert(i as u64 + 1, s.clone());
        }
    }
    let next_sketch = sketches.len() as u64 + 1;
    let phase = if sketches.is_empty() { Phase::SceneLoaded } else { Phase::Sketched };
    let session = Session {
        scene,
        sketches,
        next_sketch,
        phase,
        models: None,
        results: BTreeMap::new(),
        next_result: 1,
        latest: None,
    };
    Arc::new(AppState { session: RwLock::new(session), writer: tokio::sync::Mutex::new(()), config })
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/api/scene", get(get_scene))
        .route("/api/scene/image", get(get_image))
        .route("/api/sketch", post(post_sketch))
        .route("/api/sketch/{id}", delete(delete_sketch))
        .route("/api/fit", post(post_fit))
        .route("/api/solve", post(post_solve))
        .route("/api/result/{id}", get(get_result))
        .with_state(state)
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self { status, code, message: message.into() }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "conflict", message)
    }

    fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not-found", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, ExitCode::Internal.name(), message)
    }
}

impl From<sdi_core::Error> for ApiError {
    fn from(err: sdi_core::Error) -> Self {
        let code = classify(&err);
        let status = match code {
            ExitCode::InvalidScene | ExitCode::InvalidInput | ExitCode::Config | ExitCode::Infeasible => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, code.name(), err.to_string())
    }
}

impl From<CliError> for ApiError {
    fn from(err: CliError) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, err.code.name(), err.message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(json!({ "error": { "code": self.code, "message": self.message } }))).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn read_session(state: &AppState) -> ApiResult<std::sync::RwLockReadGuard<'_, Session>> {
    state.session.read().map_err(|_| ApiError::internal("session lock poisoned"))
}

fn write_session(state: &AppState) -> ApiResult<std::sync::RwLockWriteGuard<'_, Session>> {
    state.session.write().map_err(|_| ApiError::internal("session lock poisoned"))
}

/// Parses an optional JSON body; an empty body gives the defaults.
fn optional_json<T: for<'de> Deserialize<'de> + Default>(body: &Bytes) -> ApiResult<T> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(T::default());
    }
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid-input", e.to_string()))
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, sdi_core::Error> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?.map_err(ApiError::from)
}

fn camera_json(c: &CameraModel) -> serde_json::Value {
    let r = c.rotation();
    json!({
        "fx": c.fx(), "fy": c.fy(), "cx": c.cx(), "cy": c.cy(),
        "rotation": [[r[(0, 0)], r[(0, 1)], r[(0, 2)]], [r[(1, 0)], r[(1, 1)], r[(1, 2)]], [r[(2, 0)], r[(2, 1)], r[(2, 2)]]],
        "translation": [c.translation().x, c.translation().y, c.translation().z],
    })
}

fn sketch_json(id: u64, s: &Sketch) -> serde_json::Value {
    let vertices: Vec<[f64; 2]> = s.vertices().iter().map(|&(u, v)| [u, v]).collect();
    json!({ "id": id, "label": s.label().as_str(), "vertices": vertices })
}

async fn get_scene(State(state): State<SharedState>) -> ApiResult<Json<serde_json::Value>> {
    let s = read_session(&state)?;
    let sketches: Vec<_> = s.sketches.iter().map(|(id, sk)| sketch_json(*id, sk)).collect();
    Ok(Json(json!({
        "name": s.scene.name,
        "width": s.scene.depth.width(),
        "height": s.scene.depth.height(),
        "camera": camera_json(&s.scene.camera),
        "limits": { "z": [s.scene.z_limits.0, s.scene.z_limits.1], "omega": [s.scene.omega_limits.0, s.scene.omega_limits.1] },
        "phase": s.phase,
        "sketches": sketches,
        "latest_result": s.latest,
    })))
}

async fn get_image(State(state): State<SharedState>) -> ApiResult<Response> {
    let png = depth_png(&read_session(&state)?.scene.depth)?;
    Ok(([(header::CONTENT_TYPE, "image/png")], png).into_response())
}

#[derive(Debug, Deserialize)]
pub struct SketchRequest {
    pub label: String,
    pub vertices: Vec<[f64; 2]>,
}

async fn post_sketch(State(state): State<SharedState>, Json(req): Json<SketchRequest>) -> ApiResult<Response> {
    let label: Label = req.label.parse()?;
    let (w, h) = {
        let s = read_session(&state)?;
        (s.scene.depth.width(), s.scene.depth.height())
    };
    let sketch = Sketch::new(req.vertices.iter().map(|v| (v[0], v[1])).collect(), label, w, h)?;
    let _writer = state.writer.lock().await;
    let mut s = write_session(&state)?;
    let id = s.next_sketch;
    s.next_sketch += 1;
    s.sketches.insert(id, sketch);
    s.resketched();
    let body = json!({ "id": id, "phase": s.phase });
    Ok((StatusCode::CREATED, Json(body)).into_response())
}

async fn delete_sketch(State(state): State<SharedState>, Path(id): Path<u64>) -> ApiResult<Json<serde_json::Value>> {
    let _writer = state.writer.lock().await;
    let mut s = write_session(&state)?;
    if s.sketches.remove(&id).is_none() {
        return Err(ApiError::not_found(format!("no sketch {id}")));
    }
    s.resketched();
    Ok(Json(json!({ "id": id, "phase": s.phase })))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitRequest {
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    /// Pixel spacing of the probability previews.
    pub preview_step: Option<usize>,
}

/// `sigmoid(E)` of both maps at back-projected pixels on a regular image grid;
/// `null` where depth is missing.
fn previews(scene: &SceneSpec, models: &SceneModels, step: usize) -> Result<serde_json::Value, sdi_core::Error> {
    let step = step.max(1);
    let (w, h) = (scene.depth.width(), scene.depth.height());
    let (cols, rows) = (w.div_ceil(step), h.div_ceil(step));
    let mut points = Vec::new();
    let mut slots = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let (u, v) = (c * step, r * step);
            match scene.depth.get(u, v) {
                Some(z) => {
                    let p = scene.camera.project_pixel(u as f64, v as f64, z as f64)?;
                    slots.push(Some(points.len() / 3));
                    points.extend_from_slice(&[p.x, p.y, p.z]);
                }
                None => slots.push(None),
            }
        }
    }
    let roi = models.roi.energies(&points)?;
    let xy: Vec<f64> = points.chunks(3).flat_map(|p| [p[0], p[1]]).collect();
    let constraint = match &models.constraint {
        Some(c) => Some(c.energies(&xy)?),
        None => None,
    };
    let pick = |values: &[f64]| -> Vec<Option<f64>> { slots.iter().map(|s| s.map(|i| sigmoid(values[i]))).collect() };
    Ok(json!({
        "step": step,
        "cols": cols,
        "rows": rows,
        "roi": pick(&roi),
        "constraint": constraint.as_deref().map(pick),
    }))
}

fn model_summary(m: &sdi_core::EnergyModel) -> serde_json::Value {
    json!({
        "input_dim": m.input_dim(),
        "parameters": m.network().parameter_count(),
        "domain": { "lo": m.domain().lo, "hi": m.domain().hi },
    })
}

async fn post_fit(State(state): State<SharedState>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: FitRequest = optional_json(&body)?;
    let _writer = state.writer.lock().await;
    let scene = {
        let s = read_session(&state)?;
        if !s.sketches.values().any(|k| k.label() == Label::RegionOfInterest) {
            return Err(ApiError::conflict("sketch a region of interest before fitting"));
        }
        s.scene_with_sketches()
    };
    let mut train = state.config.train.clone();
    train.epochs = req.epochs.unwrap_or(train.epochs);
    train.seed = req.seed.unwrap_or(state.config.seed);
    let (chain, padding) = (state.config.chain.clone(), state.config.constraint_padding);
    let step = req.preview_step.unwrap_or(DEFAULT_PREVIEW_STEP);
    let (models, preview) = blocking(move || {
        let models = fit_scene_models(&scene, &chain, &train, padding)?;
        let preview = previews(&scene, &models, step)?;
        Ok((models, preview))
    })
    .await?;
    let body = json!({
        "phase": Phase::Fitted,
        "models": {
            "roi": model_summary(&models.roi),
            "constraint": models.constraint.as_ref().map(model_summary),
        },
        "preview": preview,
    });
    let mut s = write_session(&state)?;
    s.models = Some(Arc::new(models));
    s.phase = Phase::Fitted;
    s.latest = None;
    Ok(Json(body))
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveRequest {
    pub restarts: Option<usize>,
    pub seed: Option<u64>,
    pub iterations: Option<usize>,
    pub samples: Option<usize>,
    pub step_size: Option<f64>,
    pub tau: Option<f64>,
}

/// Image position of the base's floor point, if it is in front of the camera.
fn floor_pixel(camera: &CameraModel, b: &BaseConfig) -> Option<[f64; 2]> {
    camera.project_point(&Vector3::new(b.x, b.y, 0.0)).map(|(u, v, _)| [u, v])
}

async fn post_solve(State(state): State<SharedState>, body: Bytes) -> ApiResult<Json<serde_json::Value>> {
    let req: SolveRequest = optional_json(&body)?;
    let _writer = state.writer.lock().await;
    let (scene, models) = {
        let s = read_session(&state)?;
        match &s.models {
            Some(m) => (s.scene_with_sketches(), Arc::clone(m)),
            None => return Err(ApiError::conflict("fit the maps before solving")),
        }
    };
    let d = SolverConfig::default();
    let solver = SolverConfig {
        iterations: req.iterations.unwrap_or(d.iterations),
        samples: req.samples.unwrap_or(d.samples),
        step_size: req.step_size.unwrap_or(d.step_size),
        tau: req.tau.unwrap_or(d.tau),
        z_limits: scene.z_limits,
        omega_limits: scene.omega_limits,
        seed: req.seed.unwrap_or(state.config.seed),
        ..d
    };
    let restarts = req.restarts.unwrap_or(DEFAULT_RESTARTS);
    let chain = state.config.chain.clone();
    let camera = scene.camera.clone();
    let result = blocking(move || {
        let region = placement_region(&scene, &chain)?;
        solve_multistart(&models.roi, models.constraint_fn(), &chain, &solver, restarts, &region)
    })
    .await?;

    let b = result.best;
    let trace: Vec<_> = result.traces[result.best_index]
        .entries
        .iter()
        .map(|e| {
            json!({
                "iteration": e.iteration,
                "x": e.base.x, "y": e.base.y, "z": e.base.z, "omega": e.base.omega,
                "expected_energy": e.expected_energy,
                "projected": e.projected,
                "pixel": floor_pixel(&camera, &e.base),
            })
        })
        .collect();
    let restart_rows: Vec<_> = result
        .finals
        .iter()
        .zip(&result.scores)
        .map(|(f, s)| json!({ "x": f.x, "y": f.y, "z": f.z, "omega": f.omega, "expected_energy": s }))
        .collect();

    let mut s = write_session(&state)?;
    let id = s.next_result;
    s.next_result += 1;
    let body = json!({
        "id": id,
        "base": { "x": b.x, "y": b.y, "z": b.z, "omega": b.omega },
        "expected_energy": result.scores[result.best_index],
        "pixel": floor_pixel(&camera, &b),
        "trace": trace,
        "restarts": restart_rows,
    });
    s.results.insert(id, Arc::new(body.clone()));
    s.latest = Some(id);
    s.phase = Phase::Solved;
    Ok(Json(body))
}

async fn get_result(State(state): State<SharedState>, Path(id): Path<u64>) -> ApiResult<Json<serde_json::Value>> {
    let s = read_session(&state)?;
    let r = s.results.get(&id).ok_or_else(|| ApiError::not_found(format!("no result {id}")))?;
    Ok(Json((**r).clone()))
}

/// `sdi serve`: binds, prints the address, then serves until killed.
pub fn run_serve(args: &ServeArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut manifest = RunManifest::new("serve", Vec::new());
    let scene = load_scene(&args.scene, args.scene_seed, &mut manifest)?;
    let chain = load_chain_arg(args.chain.as_deref(), &mut manifest)?;
    let config = SessionConfig {
        train: args.train.apply(TrainConfig::default(), args.seed),
        constraint_padding: args.constraint_padding,
        chain,
        seed: args.seed,
    };
    let state = new_state(scene, args.blank, config);
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::new(ExitCode::Internal, format!("runtime: {e}")))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port)).await.map_err(|e| {
            if e.kind() == std::io::ErrorKind::AddrInUse {
                CliError::new(ExitCode::PortInUse, format!("{}:{} is already in use", args.host, args.port))
            } else {
                CliError::new(ExitCode::Io, format!("bind {}:{}: {e}", args.host, args.port))
            }
        })?;
        let addr = listener.local_addr().map_err(|e| CliError::new(ExitCode::Io, e.to_string()))?;
        writeln!(out, "listening on http://{addr}").map_err(|e| CliError::new(ExitCode::Io, e.to_string()))?;
        out.flush().map_err(|e| CliError::new(ExitCode::Io, e.to_string()))?;
        axum::serve(listener, router(state)).await.map_err(|e| CliError::new(ExitCode::Io, format!("server: {e}")))
    })
}
