//! JSON API over a [`ProjectStore`] for the scene review workflow.
//!
//! Reads serve the current snapshot. Writes go through the project's review
//! store, which serializes them, and run on the blocking pool because they
//! fsync the journal and may call a generator backend.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use scenesmith_core::assembly::{verify_manifest, BuildManifest};
use scenesmith_core::generation::{DraftArtifact, GenerationConfig, GeneratorBackend, TemplateSet, Track};
use scenesmith_core::plan::SceneId;
use scenesmith_core::review::{
    Criterion, ProjectReview, ProjectStore, ReviewError, ReviewRecord, SceneEntry, SceneState, Verdict,
};
use scenesmith_core::sync::Timeline;
use scenesmith_core::validation::ValidationReport;

/// What the regenerate endpoint needs to produce a new draft.
pub struct Regenerator {
    pub backend: Arc<dyn GeneratorBackend>,
    pub templates: TemplateSet,
    pub config: GenerationConfig,
}

#[derive(Clone)]
pub struct AppState {
    pub store: Arc<ProjectStore>,
    pub regen: Arc<Regenerator>,
}

#[derive(Debug, Error)]
pub enum ServeError {
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Error body: `{"error": kind, "message": text}`.
#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        Self { status, kind, message: message.into() }
    }
}

impl From<ReviewError> for ApiError {
    fn from(e: ReviewError) -> Self {
        let (status, kind) = match &e {
            ReviewError::UnknownProject(_) => (StatusCode::NOT_FOUND, "unknown_project"),
            ReviewError::UnknownScene(_) => (StatusCode::NOT_FOUND, "unknown_scene"),
            ReviewError::VersionConflict { .. } => (StatusCode::CONFLICT, "version_conflict"),
            ReviewError::IllegalTransition { .. } => (StatusCode::CONFLICT, "illegal_transition"),
            ReviewError::NotRoutedToMerge(_) => (StatusCode::CONFLICT, "not_routed_to_merge"),
            ReviewError::MissingNote => (StatusCode::UNPROCESSABLE_ENTITY, "missing_note"),
            ReviewError::StoreCorrupt { .. } => (StatusCode::INTERNAL_SERVER_ERROR, "store_corrupt"),
            ReviewError::Project(_) => (StatusCode::INTERNAL_SERVER_ERROR, "project_io"),
            ReviewError::Generation(_) => (StatusCode::BAD_GATEWAY, "generation_failed"),
        };
        Self::new(status, kind, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            log::error!("{}: {}", self.kind, self.message);
        }
        (self.status, Json(json!({ "error": self.kind, "message": self.message }))).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

fn project(state: &AppState, id: &str) -> Result<Arc<ProjectReview>, ApiError> {
    Ok(state.store.get(id)?)
}

fn scene(review: &ProjectReview, sid: u32) -> Result<SceneEntry, ApiError> {
    review.snapshot().get(SceneId(sid)).cloned().ok_or_else(|| ReviewError::UnknownScene(SceneId(sid)).into())
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "bad_request", e.to_string()))
}

/// Runs a store write on the blocking pool.
async fn write<F>(f: F) -> ApiResult<SceneEntry>
where
    F: FnOnce() -> Result<SceneEntry, ReviewError> + Send + 'static,
{
    match tokio::task::spawn_blocking(f).await {
        Ok(r) => Ok(Json(r?)),
        Err(e) => Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "worker_failed", e.to_string())),
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: String,
    pub topic: String,
    pub scenes: usize,
    pub approved: usize,
}

async fn list_projects(State(state): State<AppState>) -> ApiResult<Vec<ProjectSummary>> {
    let mut out = Vec::new();
    for id in state.store.ids() {
        let review = project(&state, &id)?;
        let book = review.snapshot();
        out.push(ProjectSummary {
            topic: review.plan().brief.topic_title.clone(),
            scenes: book.scenes.len(),
            approved: book
                .scenes
                .values()
                .filter(|s| matches!(s.state, SceneState::Approved | SceneState::Rendered))
                .count(),
            id,
        });
    }
    Ok(Json(out))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneSummary {
    pub scene_id: SceneId,
    pub goal: String,
    pub planned_duration_s: f64,
    pub state: SceneState,
    pub version: u64,
}

async fn list_scenes(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Vec<SceneSummary>> {
    let review = project(&state, &id)?;
    let book = review.snapshot();
    Ok(Json(
        review
            .plan()
            .scenes
            .iter()
            .filter_map(|s| {
                let e = book.get(s.scene_id)?;
                Some(SceneSummary {
                    scene_id: s.scene_id,
                    goal: s.goal.clone(),
                    planned_duration_s: s.planned_duration_s,
                    state: e.state,
                    version: e.version,
                })
            })
            .collect(),
    ))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneArtifacts {
    pub narration: Option<DraftArtifact>,
    pub code: Option<DraftArtifact>,
    pub narration_versions: Vec<u32>,
    pub code_versions: Vec<u32>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct SceneDetail {
    pub scene_id: SceneId,
    pub state: SceneState,
    pub version: u64,
    pub record: ReviewRecord,
    pub artifacts: SceneArtifacts,
    pub timeline: Option<Timeline>,
    pub validation: Option<ValidationReport>,
}

async fn scene_detail(State(state): State<AppState>, Path((id, sid)): Path<(String, u32)>) -> ApiResult<SceneDetail> {
    let review = project(&state, &id)?;
    let entry = scene(&review, sid)?;
    let p = review.project();
    let s = entry.scene_id;
    let io = |e| ApiError::from(ReviewError::Project(e));
    Ok(Json(SceneDetail {
        artifacts: SceneArtifacts {
            narration: p.latest_artifact(s, Track::Narration).map_err(io)?,
            code: p.latest_artifact(s, Track::Code).map_err(io)?,
            narration_versions: p.artifact_versions(s, Track::Narration),
            code_versions: p.artifact_versions(s, Track::Code),
        },
        timeline: p.load_timeline(s).map_err(io)?,
        validation: p.load_report(s).map_err(io)?,
        scene_id: s,
        state: entry.state,
        version: entry.version,
        record: entry.record,
    }))
}

#[derive(Debug, Serialize, Deserialize)]
pub struct VerdictBody {
    pub criterion: Criterion,
    pub verdict: Verdict,
    #[serde(default)]
    pub note: String,
    pub version: u64,
}

async fn post_verdict(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, u32)>,
    body: Bytes,
) -> ApiResult<SceneEntry> {
    let review = project(&state, &id)?;
    let b: VerdictBody = parse_body(&body)?;
    write(move || review.record_verdict(SceneId(sid), b.criterion, b.verdict, &b.note, Some(b.version))).await
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegenerateBody {
    pub track: Track,
    #[serde(default)]
    pub note: String,
    pub version: u64,
}

async fn post_regenerate(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, u32)>,
    body: Bytes,
) -> ApiResult<SceneEntry> {
    let review = project(&state, &id)?;
    let b: RegenerateBody = parse_body(&body)?;
    let regen = state.regen.clone();
    write(move || {
        review.request_regeneration(
            SceneId(sid),
            b.track,
            &b.note,
            Some(b.version),
            regen.backend.as_ref(),
            &regen.templates,
            &regen.config,
        )
    })
    .await
}

#[derive(Debug, Default, Serialize, Deserialize)]
pub struct SubmitBody {
    pub version: Option<u64>,
}

/// The body is optional (empty or `null`); without a version the submit is
/// unconditional.
async fn post_submit(
    State(state): State<AppState>,
    Path((id, sid)): Path<(String, u32)>,
    body: Bytes,
) -> ApiResult<SceneEntry> {
    let review = project(&state, &id)?;
    let b: SubmitBody = if body.iter().all(u8::is_ascii_whitespace) {
        SubmitBody::default()
    } else {
        parse_body::<Option<SubmitBody>>(&body)?.unwrap_or_default()
    };
    write(move || review.submit(SceneId(sid), b.version)).await
}

async fn get_manifest(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    let review = project(&state, &id)?;
    let p = review.project();
    let manifest: Option<BuildManifest> = p.read_json_opt("manifest.json").map_err(ReviewError::from)?;
    let manifest =
        manifest.ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "no_manifest", "project has not been assembled"))?;
    let verified = verify_manifest(p, &manifest).map_err(ReviewError::from)?;
    Ok(Json(json!({ "manifest": manifest, "verified": verified })))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/projects", get(list_projects))
        .route("/projects/{id}/scenes", get(list_scenes))
        .route("/projects/{id}/scenes/{sid}", get(scene_detail))
        .route("/projects/{id}/scenes/{sid}/verdict", post(post_verdict))
        .route("/projects/{id}/scenes/{sid}/regenerate", post(post_regenerate))
        .route("/projects/{id}/scenes/{sid}/submit", post(post_submit))
        .route("/projects/{id}/manifest", get(get_manifest))
        .with_state(state)
}

/// Binds `addr`, mapping an occupied port to [`ServeError::PortInUse`].
pub async fn bind(addr: SocketAddr) -> Result<tokio::net::TcpListener, ServeError> {
    tokio::net::TcpListener::bind(addr).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => ServeError::PortInUse(addr.port()),
        _ => ServeError::Io(e),
    })
}

pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> Result<(), ServeError> {
    log::info!("review API listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
