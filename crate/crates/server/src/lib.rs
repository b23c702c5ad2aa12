//! REST service around [`aida_session::Session`] for the web console.
//!
//! Mutations of one session are serialized through its command lock and
//! run on the blocking pool; reads are served from the snapshot published
//! after every mutation and never wait for inference.

mod error;
mod pcm;

use std::collections::HashMap;
use std::net::{IpAddr, Ipv4Addr, SocketAddr};
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use aida_session::{EnvironmentKind, EventLog, Session, SessionConfig, SessionError, SessionState};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::Mutex;
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

pub use error::ApiError;
pub use pcm::{encode_pcm16, WaveformMeta, SAMPLE_RATE};

/// Smallest and largest EFE heatmap resolution served.
pub const EFE_RESOLUTION: (usize, usize) = (5, 101);
pub const DEFAULT_EFE_RESOLUTION: usize = 21;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiConfig {
    pub bind: IpAddr,
    pub port: u16,
    /// Built console assets, served for every path the API does not claim.
    pub static_dir: Option<PathBuf>,
    /// Session journals are written here as `<id>.jsonl`.
    pub data_dir: PathBuf,
}

impl Default for ApiConfig {
    fn default() -> Self {
        Self { bind: IpAddr::V4(Ipv4Addr::LOCALHOST), port: 8080, static_dir: None, data_dir: PathBuf::from("aida-data") }
    }
}

impl ApiConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.port == 0 {
            return Err("port must lie in [1, 65535]".into());
        }
        Ok(())
    }

    pub fn addr(&self) -> SocketAddr {
        SocketAddr::new(self.bind, self.port)
    }
}

struct SessionHandle {
    session: Arc<Mutex<Session>>,
    view: RwLock<Arc<SessionState>>,
}

impl SessionHandle {
    fn publish(&self, state: &SessionState) {
        *self.view.write().expect("snapshot lock") = Arc::new(state.clone());
    }

    fn snapshot(&self) -> Arc<SessionState> {
        self.view.read().expect("snapshot lock").clone()
    }
}

/// Shared server state: the session table and the journal directory.
#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<SessionHandle>>>>,
    data_dir: PathBuf,
}

impl AppState {
    pub fn new(data_dir: PathBuf) -> std::io::Result<Self> {
        std::fs::create_dir_all(&data_dir)?;
        Ok(Self { sessions: Arc::default(), data_dir })
    }

    fn handle(&self, id: &str) -> Result<Arc<SessionHandle>, ApiError> {
        self.sessions.read().expect("session table").get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    /// Latest published state of a session.
    pub fn snapshot(&self, id: &str) -> Option<Arc<SessionState>> {
        self.handle(id).ok().map(|h| h.snapshot())
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.sessions.read().expect("session table").keys().cloned().collect()
    }

    /// Flush every journal to disk.
    pub async fn sync_all(&self) {
        let handles: Vec<_> = self.sessions.read().expect("session table").values().cloned().collect();
        for h in handles {
            if let Err(e) = h.session.lock().await.sync() {
                tracing::warn!("journal sync failed: {e}");
            }
        }
    }

    /// Run a mutation on the blocking pool under the session's command lock.
    /// With `wait == false` a busy session is reported instead of queued.
    async fn mutate<R, F>(&self, id: &str, wait: bool, f: F) -> Result<R, ApiError>
    where
        R: Send + 'static,
        F: FnOnce(&mut Session) -> Result<R, SessionError> + Send + 'static,
    {
        let handle = self.handle(id)?;
        let mut guard = if wait {
            handle.session.clone().lock_owned().await
        } else {
            handle.session.clone().try_lock_owned().map_err(|_| ApiError::busy())?
        };
        let (out, state) = tokio::task::spawn_blocking(move || {
            let out = f(&mut guard);
            (out, guard.state().clone())
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
        handle.publish(&state);
        out.map_err(ApiError::from)
    }
}

pub fn router(state: AppState, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/next", post(next_frame))
        .route("/sessions/{id}/appraisal", post(appraisal))
        .route("/sessions/{id}/optimize", post(optimize))
        .route("/sessions/{id}/efe", get(efe))
        .route("/sessions/{id}/bfe", get(bfe))
        .route("/sessions/{id}/waveforms/{kind}", get(waveform))
        .route("/sessions/{id}/waveforms/{kind}/meta", get(waveform_meta))
        .with_state(state);
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    };
    app.layer(CorsLayer::permissive())
}

/// Bind, serve until `shutdown` resolves, then flush every journal.
pub async fn serve(config: ApiConfig, shutdown: impl std::future::Future<Output = ()> + Send + 'static) -> anyhow::Result<()> {
    config.validate().map_err(anyhow::Error::msg)?;
    let state = AppState::new(config.data_dir.clone())?;
    let listener = tokio::net::TcpListener::bind(config.addr())
        .await
        .map_err(|e| anyhow::anyhow!("cannot bind {}: {e}", config.addr()))?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state.clone(), config.static_dir.clone()))
        .with_graceful_shutdown(shutdown)
        .await?;
    state.sync_all().await;
    Ok(())
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

#[derive(Deserialize)]
struct CreateRequest {
    environment: String,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    frame_len: Option<usize>,
}

async fn create_session(State(app): State<AppState>, Json(req): Json<CreateRequest>) -> Result<Response, ApiError> {
    let kind: EnvironmentKind = req.environment.parse()?;
    if kind == EnvironmentKind::External {
        return Err(SessionError::UnknownEnvironment(req.environment).into());
    }
    let mut config = SessionConfig::new(kind, req.seed.unwrap_or(0));
    if let Some(w) = req.frame_len {
        config.frame_len = w;
    }
    let id = uuid::Uuid::new_v4().simple().to_string();
    let path = app.data_dir.join(format!("{id}.jsonl"));
    let session = tokio::task::spawn_blocking(move || Session::for_environment(config, Some(EventLog::create(&path)?)))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    let handle = SessionHandle { view: RwLock::new(Arc::new(session.state().clone())), session: Arc::new(Mutex::new(session)) };
    app.sessions.write().expect("session table").insert(id.clone(), Arc::new(handle));
    Ok((StatusCode::CREATED, Json(json!({ "session_id": id }))).into_response())
}

fn models(state: &SessionState) -> Vec<String> {
    state.bank().models.iter().map(|m| m.name.clone()).collect()
}

fn frame_summary(id: &str, state: &SessionState) -> Value {
    let Some(f) = &state.latest else {
        return Value::Null;
    };
    let url = |kind: &str| format!("/sessions/{id}/waveforms/{kind}");
    json!({
        "k": f.k,
        "t": f.t,
        "label": f.label,
        "map": f.map,
        "models": models(state),
        "belief": f.belief,
        "bfe": f.bfe,
        "gains": f.gains,
        "degraded": f.degraded,
        "waveforms": {
            "input": url("input"),
            "speech": url("speech"),
            "noise": url("noise"),
            "output": url("output"),
        },
    })
}

async fn get_session(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = app.handle(&id)?.snapshot();
    let focus = &s.agents[s.focus()];
    Ok(Json(json!({
        "session_id": id,
        "environment": s.config.environment,
        "seed": s.config.seed,
        "frame_len": s.config.frame_len,
        "frame": s.k,
        "t": s.t,
        "current_context": s.current,
        "models": models(&s),
        "belief": s.tracker.belief.probs(),
        "gains": s.gains(),
        "kernel": { "sigma": focus.gpc.params.sigma, "l": focus.gpc.params.length },
        "appraisals": s.appraisals,
        "history": s.history,
        "latest": frame_summary(&id, &s),
    })))
}

async fn next_frame(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    app.mutate(&id, false, |s| s.next_frame().map(|_| ())).await?;
    let s = app.handle(&id)?.snapshot();
    Ok(Json(frame_summary(&id, &s)))
}

/// `r` must be 0, 1 (or a boolean), or null for a skipped appraisal.
fn parse_appraisal(body: &Value) -> Result<Option<bool>, ApiError> {
    match body.get("r") {
        None | Some(Value::Null) => Ok(None),
        Some(Value::Bool(b)) => Ok(Some(*b)),
        Some(Value::Number(n)) if n.as_u64() == Some(0) => Ok(Some(false)),
        Some(Value::Number(n)) if n.as_u64() == Some(1) => Ok(Some(true)),
        Some(other) => Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_appraisal", format!("r must be 0, 1 or null, got {other}"))),
    }
}

async fn appraisal(State(app): State<AppState>, Path(id): Path<String>, Json(body): Json<Value>) -> Result<Json<Value>, ApiError> {
    let r = parse_appraisal(&body)?;
    let proposal = app.mutate(&id, true, move |s| s.handle_appraisal(r)).await?;
    let s = app.handle(&id)?.snapshot();
    let c = s.focus();
    Ok(Json(json!({
        "context": c,
        "proposal": proposal.map(|p| p.u),
        "gains": s.gains()[c],
        "trial": s.agents[c].trials,
    })))
}

async fn optimize(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let params = app.mutate(&id, true, |s| s.optimize()).await?;
    Ok(Json(json!({ "sigma": params.sigma, "l": params.length })))
}

#[derive(Deserialize)]
struct EfeQuery {
    resolution: Option<usize>,
}

async fn efe(State(app): State<AppState>, Path(id): Path<String>, Query(q): Query<EfeQuery>) -> Result<Json<Value>, ApiError> {
    let s = app.handle(&id)?.snapshot();
    let resolution = q.resolution.unwrap_or(DEFAULT_EFE_RESOLUTION).clamp(EFE_RESOLUTION.0, EFE_RESOLUTION.1);
    let field = tokio::task::spawn_blocking(move || s.efe(resolution).map(|f| (f, s))).await.map_err(|e| ApiError::internal(e.to_string()))?;
    let (field, s) = field?;
    Ok(Json(json!({
        "context": s.focus(),
        "resolution": resolution,
        "lo": field.grid.lo,
        "hi": field.grid.hi,
        "values": field.values(),
        "gains": s.gains()[s.focus()],
    })))
}

async fn bfe(State(app): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ApiError> {
    let s = app.handle(&id)?.snapshot();
    let f = s.latest.as_ref().ok_or(ApiError::from(SessionError::NoFrame))?;
    Ok(Json(json!({ "k": f.k, "models": models(&s), "bfe": f.bfe, "belief": f.belief, "map": f.map })))
}

fn waveform_samples<'a>(state: &'a SessionState, kind: &str) -> Result<(&'a [f64], f64, usize), ApiError> {
    let f = state.latest.as_ref().ok_or(ApiError::from(SessionError::NoFrame))?;
    let samples = match kind {
        "input" => &f.x,
        "speech" => &f.speech,
        "noise" => &f.noise,
        "output" => &f.y,
        other => return Err(ApiError::new(StatusCode::NOT_FOUND, "unknown_waveform", format!("no waveform {other:?} (input, speech, noise, output)"))),
    };
    Ok((samples, pcm::frame_scale(&[&f.x, &f.speech, &f.noise, &f.y]), f.k))
}

async fn waveform(State(app): State<AppState>, Path((id, kind)): Path<(String, String)>) -> Result<Response, ApiError> {
    let s = app.handle(&id)?.snapshot();
    let (samples, scale, _) = waveform_samples(&s, &kind)?;
    let body = encode_pcm16(samples, scale);
    Ok((
        [(header::CONTENT_TYPE, format!("audio/L16; rate={SAMPLE_RATE}; channels=1")), (header::HeaderName::from_static("x-sample-rate"), SAMPLE_RATE.to_string())],
        body,
    )
        .into_response())
}

async fn waveform_meta(State(app): State<AppState>, Path((id, kind)): Path<(String, String)>) -> Result<Json<WaveformMeta>, ApiError> {
    let s = app.handle(&id)?.snapshot();
    let (samples, scale, k) = waveform_samples(&s, &kind)?;
    Ok(Json(WaveformMeta { kind, sample_rate: SAMPLE_RATE, length: samples.len(), scale, k, encoding: "pcm_s16le".into() }))
}
