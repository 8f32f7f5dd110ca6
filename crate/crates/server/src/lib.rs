//! HTTP+JSON API over generation sessions.
//!
//! | method | path | body | success |
//! |---|---|---|---|
//! | POST | `/api/sessions` | `{"gesture"}` or `{"instruction", "image"?}`, `"backend"?`, `"async"?` | 201 record (202 when async) |
//! | GET | `/api/sessions` | | session summaries, oldest first |
//! | GET | `/api/sessions/{id}` | | full record |
//! | POST | `/api/sessions/{id}/feedback` | `{"text", "backend"?, "async"?}` | 200 record (202 when async) |
//! | POST | `/api/sessions/{id}/finalize?rate=` | | finalized artifact |
//! | GET | `/api/sessions/{id}/trajectory?rate=&iteration=` | | dense trajectory, feasibility, metrics |
//! | GET | `/api/gestures` | | builtin library |
//!
//! Errors are `{"error": {"code", "message"}}`: `NOT_FOUND` 404, `BUSY` 409
//! (another mutation of the session is in flight), `ITERATION_LIMIT` 422,
//! `BACKEND_FAILED` 502. Async requests return immediately; poll the session
//! resource until its status leaves `analyzing` / `refining`.

mod error;

pub use error::ApiError;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tower_http::cors::CorsLayer;
use tower_http::services::ServeDir;

use gesturegen_core::agents::{BackendSpec, ChatBackend, ContextInput, ImagePayload, OpenAiConfig};
use gesturegen_core::config::{AppConfig, ConfigError};
use gesturegen_core::gesture::{builtin_gestures, bundled_gesture, GestureCategory, DEMONSTRATION_NAMES};
use gesturegen_core::motion::MotionSequence;
use gesturegen_core::session::{
    FinalizedInfo, Pipeline, SessionInput, SessionRecord, SessionStatus, SessionStore, StoreError,
};
use gesturegen_core::trajectory::{check_trajectory, compute_metrics, DenseTrajectory, MotionMetrics};

/// Backend used when a request does not name one.
#[derive(Clone, Default)]
pub enum DefaultBackend {
    #[default]
    None,
    /// Built fresh for every new session.
    Spec(BackendSpec),
    /// One instance shared by all sessions.
    Shared(Arc<dyn ChatBackend>),
}

pub struct AppState {
    store: SessionStore,
    pipeline: Arc<Pipeline>,
    export_dir: PathBuf,
    openai: OpenAiConfig,
    default_backend: DefaultBackend,
    backends: Mutex<HashMap<String, Arc<dyn ChatBackend>>>,
    busy: Mutex<HashSet<String>>,
}

type Shared = Arc<AppState>;

/// Holds a session's single-writer slot until dropped.
struct BusyGuard {
    state: Shared,
    id: String,
}

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.state.busy.lock().unwrap().remove(&self.id);
    }
}

impl AppState {
    pub fn new(store: SessionStore, pipeline: Pipeline, export_dir: PathBuf, openai: OpenAiConfig) -> Self {
        Self {
            store,
            pipeline: Arc::new(pipeline),
            export_dir,
            openai,
            default_backend: DefaultBackend::None,
            backends: Mutex::new(HashMap::new()),
            busy: Mutex::new(HashSet::new()),
        }
    }

    pub fn from_config(config: &AppConfig) -> Result<Self, ConfigError> {
        let store = SessionStore::open(&config.sessions_dir)
            .map_err(|e| ConfigError::Invalid(format!("sessions directory: {e}")))?;
        Ok(Self::new(store, config.pipeline()?, config.export_dir.clone(), config.openai.clone()))
    }

    pub fn with_default_backend(mut self, backend: DefaultBackend) -> Self {
        self.default_backend = backend;
        self
    }

    pub fn store(&self) -> &SessionStore {
        &self.store
    }

    /// Repairs sessions a previous process left mid-step. Returns their ids.
    pub fn recover(&self) -> Result<Vec<String>, StoreError> {
        let mut fixed = Vec::new();
        for mut rec in self.store.list()? {
            if rec.recover_interrupted() {
                self.store.save(&rec)?;
                fixed.push(rec.id);
            }
        }
        Ok(fixed)
    }

    fn claim(self: &Arc<Self>, id: &str) -> Result<BusyGuard, ApiError> {
        if !self.busy.lock().unwrap().insert(id.to_string()) {
            return Err(ApiError::busy(id));
        }
        Ok(BusyGuard {
            state: self.clone(),
            id: id.to_string(),
        })
    }

    fn build(&self, spec: &BackendSpec) -> Result<Arc<dyn ChatBackend>, ApiError> {
        spec.build(&self.openai)
            .map_err(|e| ApiError::bad_request("BACKEND_UNAVAILABLE", e.to_string()))
    }

    fn new_backend(&self, requested: Option<&BackendSpec>) -> Result<Arc<dyn ChatBackend>, ApiError> {
        if let Some(spec) = requested {
            return self.build(spec);
        }
        match &self.default_backend {
            DefaultBackend::Spec(spec) => self.build(spec),
            DefaultBackend::Shared(b) => Ok(b.clone()),
            DefaultBackend::None => Err(ApiError::bad_request(
                "BACKEND_UNAVAILABLE",
                "no backend given and the server has no default; pass \"backend\": \"openai\" or \"scripted:<file>\"",
            )),
        }
    }

    /// The backend a session was created with, unless the request overrides it.
    fn session_backend(&self, id: &str, requested: Option<&BackendSpec>) -> Result<Arc<dyn ChatBackend>, ApiError> {
        if requested.is_none() {
            if let Some(b) = self.backends.lock().unwrap().get(id) {
                return Ok(b.clone());
            }
        }
        let b = self.new_backend(requested)?;
        self.backends.lock().unwrap().insert(id.to_string(), b.clone());
        Ok(b)
    }

    async fn run_start(
        self: &Arc<Self>,
        mut record: SessionRecord,
        backend: Arc<dyn ChatBackend>,
        guard: BusyGuard,
    ) -> Result<SessionRecord, ApiError> {
        let st = self.clone();
        blocking(move || {
            let _guard = guard;
            let outcome = st.pipeline.run_start(&record.input, backend.as_ref());
            st.pipeline.apply_start(&mut record, outcome);
            st.store.save(&record)?;
            Ok(record)
        })
        .await
    }

    async fn run_refinement(
        self: &Arc<Self>,
        mut record: SessionRecord,
        history: Vec<(MotionSequence, String)>,
        backend: Arc<dyn ChatBackend>,
        guard: BusyGuard,
    ) -> Result<SessionRecord, ApiError> {
        let st = self.clone();
        blocking(move || {
            let _guard = guard;
            let outcome = st
                .pipeline
                .run_refinement(&history, record.iterations.len() + 1, backend.as_ref());
            let result = st.pipeline.apply_refinement(&mut record, outcome);
            st.store.save(&record)?;
            result.map_err(|e| ApiError::from(e).for_session(&record.id))?;
            Ok(record)
        })
        .await
    }
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker panicked: {e}")))?
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("INVALID_BODY", e.to_string()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateSession {
    gesture: Option<String>,
    instruction: Option<String>,
    image: Option<ImagePayload>,
    backend: Option<BackendSpec>,
    #[serde(default, rename = "async")]
    asynchronous: bool,
}

impl CreateSession {
    fn input(&self) -> Result<SessionInput, ApiError> {
        let context = self.instruction.as_ref().is_some_and(|s| !s.trim().is_empty()) || self.image.is_some();
        match (&self.gesture, context) {
            (Some(g), false) if !g.trim().is_empty() => Ok(SessionInput::Gesture { name: g.trim().into() }),
            (None, true) => Ok(SessionInput::Context(ContextInput {
                image: self.image.clone(),
                instruction: self.instruction.clone().filter(|s| !s.trim().is_empty()),
            })),
            _ => Err(ApiError::bad_request(
                "INVALID_INPUT",
                "give either \"gesture\" or an \"instruction\" and/or \"image\"",
            )),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FeedbackRequest {
    text: String,
    backend: Option<BackendSpec>,
    #[serde(default, rename = "async")]
    asynchronous: bool,
}

#[derive(Debug, Serialize)]
pub struct SessionSummary {
    pub id: String,
    pub created_at: String,
    pub updated_at: String,
    pub status: SessionStatus,
    pub gesture: Option<String>,
    pub novel_gesture: bool,
    pub iterations: usize,
    pub refinements: usize,
    pub i_max: usize,
    pub latest_feasible: Option<bool>,
    pub finalized: bool,
}

impl From<&SessionRecord> for SessionSummary {
    fn from(r: &SessionRecord) -> Self {
        Self {
            id: r.id.clone(),
            created_at: r.created_at.to_rfc3339(),
            updated_at: r.updated_at.to_rfc3339(),
            status: r.status,
            gesture: r.gesture.clone(),
            novel_gesture: r.novel_gesture,
            iterations: r.iterations.len(),
            refinements: r.refinements(),
            i_max: r.i_max,
            latest_feasible: r.latest().map(|it| it.feasible()),
            finalized: r.finalized.is_some(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct FinalizeResponse {
    pub session_id: String,
    pub feasible: bool,
    #[serde(flatten)]
    pub info: FinalizedInfo,
}

#[derive(Debug, Serialize)]
pub struct TrajectoryResponse {
    pub session_id: String,
    pub iteration: usize,
    pub trajectory: DenseTrajectory,
    pub metrics: MotionMetrics,
}

#[derive(Debug, Serialize)]
struct LibraryEntry {
    name: String,
    category: GestureCategory,
    description: String,
    sequence: MotionSequence,
}

#[derive(Debug, Deserialize)]
struct RateQuery {
    rate: Option<f64>,
    iteration: Option<usize>,
}

async fn create_session(State(st): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateSession = parse_body(&body)?;
    let input = req.input()?;
    let backend = st.new_backend(req.backend.as_ref())?;
    let record = st.pipeline.new_session(input);
    st.store.save(&record)?;
    let guard = st.claim(&record.id)?;
    st.backends.lock().unwrap().insert(record.id.clone(), backend.clone());
    if req.asynchronous {
        let task_st = st.clone();
        let pending = record.clone();
        tokio::spawn(async move {
            if let Err(e) = task_st.run_start(pending, backend, guard).await {
                tracing::warn!(error = %e.message, "background generation failed");
            }
        });
        return Ok((StatusCode::ACCEPTED, Json(record)).into_response());
    }
    let record = st.run_start(record, backend, guard).await?;
    if record.status == SessionStatus::Failed {
        let message = record.diagnostics.last().cloned().unwrap_or_else(|| "generation failed".into());
        return Err(ApiError::new(StatusCode::BAD_GATEWAY, "BACKEND_FAILED", message).for_session(&record.id));
    }
    Ok((StatusCode::CREATED, Json(record)).into_response())
}

async fn list_sessions(State(st): State<Shared>) -> Result<Json<Vec<SessionSummary>>, ApiError> {
    Ok(Json(st.store.list()?.iter().map(SessionSummary::from).collect()))
}

async fn get_session(State(st): State<Shared>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionRecord>, ApiError> {
    Ok(Json(st.store.load(&id)?))
}

async fn submit_feedback(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let req: FeedbackRequest = parse_body(&body)?;
    let guard = st.claim(&id)?;
    let mut record = st.store.load(&id)?;
    let backend = st.session_backend(&id, req.backend.as_ref())?;
    let history = st.pipeline.prepare_feedback(&mut record, &req.text)?;
    st.store.save(&record)?;
    if req.asynchronous {
        let task_st = st.clone();
        let pending = record.clone();
        tokio::spawn(async move {
            if let Err(e) = task_st.run_refinement(pending, history, backend, guard).await {
                tracing::warn!(error = %e.message, "background refinement failed");
            }
        });
        return Ok((StatusCode::ACCEPTED, Json(record)).into_response());
    }
    let record = st.run_refinement(record, history, backend, guard).await?;
    Ok(Json(record).into_response())
}

async fn finalize(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RateQuery>,
) -> Result<Json<FinalizeResponse>, ApiError> {
    let guard = st.claim(&id)?;
    let mut record = st.store.load(&id)?;
    let rate = q.rate.unwrap_or(st.pipeline.config.rate);
    let task_st = st.clone();
    blocking(move || {
        let _guard = guard;
        let traj = task_st
            .pipeline
            .finalize(&mut record, rate, Some(&task_st.export_dir))
            .map_err(|e| ApiError::from(e).for_session(&record.id))?;
        task_st.store.save(&record)?;
        Ok(Json(FinalizeResponse {
            session_id: record.id.clone(),
            feasible: traj.feasibility.as_ref().is_some_and(|f| f.feasible()),
            info: record.finalized.clone().expect("set by finalize"),
        }))
    })
    .await
}

async fn trajectory(
    State(st): State<Shared>,
    UrlPath(id): UrlPath<String>,
    Query(q): Query<RateQuery>,
) -> Result<Json<TrajectoryResponse>, ApiError> {
    let record = st.store.load(&id)?;
    let index = q
        .iteration
        .or(record.finalized.as_ref().map(|f| f.iteration))
        .or(record.latest().map(|it| it.index))
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("session {id} has no iterations")))?;
    let it = record
        .iterations
        .iter()
        .find(|it| it.index == index)
        .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "NOT_FOUND", format!("session {id} has no iteration {index}")))?;
    let seq = it.sequence.clone();
    let rate = q.rate.unwrap_or(st.pipeline.config.rate);
    let task_st = st.clone();
    blocking(move || {
        let p = &task_st.pipeline;
        let traj = p.trajectory(&seq, rate).map_err(ApiError::from)?;
        let metrics = compute_metrics(&traj).map_err(|e| ApiError::bad_request("INVALID_RATE", e.to_string()))?;
        let report = check_trajectory(&traj, &p.body, &p.ik);
        Ok(Json(TrajectoryResponse {
            session_id: id,
            iteration: index,
            trajectory: traj.with_feasibility(report),
            metrics,
        }))
    })
    .await
}

async fn gestures() -> Result<Json<serde_json::Value>, ApiError> {
    let mut entries = Vec::new();
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for spec in builtin_gestures() {
        let (_, sequence) = bundled_gesture(&spec.name).map_err(|e| ApiError::internal(e.to_string()))?;
        *counts.entry(spec.category.as_str()).or_default() += 1;
        entries.push(LibraryEntry {
            name: spec.name,
            category: spec.category,
            description: spec.description,
            sequence,
        });
    }
    Ok(Json(serde_json::json!({
        "gestures": entries,
        "categories": counts,
        "demonstrations": DEMONSTRATION_NAMES,
    })))
}

pub fn router(state: Shared, static_dir: Option<&Path>) -> Router {
    let app = Router::new()
        .route("/api/sessions", post(create_session).get(list_sessions))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/feedback", post(submit_feedback))
        .route("/api/sessions/{id}/finalize", post(finalize))
        .route("/api/sessions/{id}/trajectory", get(trajectory))
        .route("/api/gestures", get(gestures))
        .with_state(state)
        .layer(CorsLayer::permissive());
    match static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app,
    }
}

/// Recovers interrupted sessions and serves until the process is stopped.
pub async fn serve(state: AppState, bind: &str, static_dir: Option<&Path>) -> std::io::Result<()> {
    let recovered = state.recover().map_err(std::io::Error::other)?;
    if !recovered.is_empty() {
        tracing::info!(count = recovered.len(), "recovered interrupted sessions");
    }
    let listener = tokio::net::TcpListener::bind(bind).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(Arc::new(state), static_dir)).await
}
