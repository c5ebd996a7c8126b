//! HTTP service backing the annotation UI. Each session lives in its own
//! directory under the assets root and is loaded on first use.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use contactfit::contact::CorrespondenceSet;
use contactfit::io::{self, AnnotationDocument, Clicks, PatchRecord};
use contactfit::{SurfaceMesh, SurfacePoint, Vec3};
use serde::{Deserialize, Serialize};
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

use crate::annotate::{patch_record, place_patch, prepare_patches, scaled_object, SourcePatch};

pub const UNDO_DEPTH: usize = 64;

/// `session.json` in a session directory. Paths are relative to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionAssets {
    pub image_id: String,
    #[serde(default)]
    pub image_path: String,
    pub object_id: String,
    /// Metric scale of the object mesh.
    pub object_scale: f64,
    pub body: String,
    pub contacts: String,
    pub object: String,
}

#[derive(Debug, Clone)]
enum Undo {
    /// Return a committed patch to pending.
    Commit(usize),
    /// Recommit a patch that was reopened by a new transfer.
    Reopen(Box<PatchRecord>),
}

/// Committed and pending patches with a bounded undo history.
#[derive(Debug, Clone, Default)]
pub struct SessionState {
    committed: BTreeMap<usize, PatchRecord>,
    pending: Option<PatchRecord>,
    undo: VecDeque<Undo>,
}

impl SessionState {
    fn push(&mut self, u: Undo) {
        self.undo.push_back(u);
        if self.undo.len() > UNDO_DEPTH {
            self.undo.pop_front();
        }
    }

    /// A new transfer becomes pending. A committed record of the same patch
    /// is reopened.
    pub fn propose(&mut self, record: PatchRecord) {
        if let Some(old) = self.committed.remove(&record.patch_id) {
            self.push(Undo::Reopen(Box::new(old)));
        }
        self.pending = Some(record);
    }

    pub fn commit(&mut self, patch_id: usize) -> Result<(), ApiError> {
        match self.pending.take() {
            Some(p) if p.patch_id == patch_id => {
                self.committed.insert(patch_id, p);
                self.push(Undo::Commit(patch_id));
                Ok(())
            }
            other => {
                self.pending = other;
                Err(ApiError::conflict(format!("patch {patch_id} has no pending transfer")))
            }
        }
    }

    pub fn undo(&mut self) -> Result<(), ApiError> {
        match self.undo.pop_back() {
            Some(Undo::Commit(id)) => {
                self.pending = self.committed.remove(&id);
            }
            Some(Undo::Reopen(record)) => {
                if self.pending.as_ref().is_some_and(|p| p.patch_id == record.patch_id) {
                    self.pending = None;
                }
                self.committed.insert(record.patch_id, *record);
            }
            None => return Err(ApiError::conflict("nothing to undo")),
        }
        Ok(())
    }

    pub fn committed_ids(&self) -> Vec<usize> {
        self.committed.keys().copied().collect()
    }

    pub fn pending_id(&self) -> Option<usize> {
        self.pending.as_ref().map(|p| p.patch_id)
    }

    pub fn undo_depth(&self) -> usize {
        self.undo.len()
    }
}

struct Session {
    id: String,
    assets: SessionAssets,
    body: SurfaceMesh,
    object: SurfaceMesh,
    scaled: SurfaceMesh,
    contacts: BTreeSet<usize>,
    patches: Vec<SourcePatch>,
    skipped: Vec<usize>,
    created: String,
    updated: String,
    state: SessionState,
}

#[derive(Clone)]
struct AppState {
    root: PathBuf,
    sessions: Arc<tokio::sync::Mutex<HashMap<String, Arc<Mutex<Session>>>>>,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn conflict(message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, message)
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

fn now() -> String {
    OffsetDateTime::now_utc().format(&Rfc3339).unwrap_or_default()
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn load_session(root: PathBuf, id: String) -> Result<Session, ApiError> {
    let dir = root.join(&id);
    let manifest = dir.join("session.json");
    if !manifest.is_file() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("no session {id:?}")));
    }
    let broken = |e: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, format!("session {id}: {e}"));
    let assets: SessionAssets = io::load_json(&manifest).map_err(|e| broken(e.to_string()))?;
    if !(assets.object_scale > 0.0 && assets.object_scale.is_finite()) {
        return Err(broken("object scale must be positive".into()));
    }
    let body = io::load_mesh_file(dir.join(&assets.body)).map_err(|e| broken(e.to_string()))?;
    let object = io::load_mesh_file(dir.join(&assets.object)).map_err(|e| broken(e.to_string()))?;
    let contacts: BTreeSet<usize> = io::load_json(dir.join(&assets.contacts)).map_err(|e| broken(e.to_string()))?;
    let (patches, skipped) = prepare_patches(&body, &contacts).map_err(|e| broken(e.to_string()))?;
    let scaled = scaled_object(&object, assets.object_scale);
    let created = now();
    Ok(Session {
        id,
        assets,
        body,
        object,
        scaled,
        contacts,
        patches,
        skipped,
        updated: created.clone(),
        created,
        state: SessionState::default(),
    })
}

async fn session(state: &AppState, id: String) -> Result<Arc<Mutex<Session>>, ApiError> {
    if !valid_id(&id) {
        return Err(ApiError::bad_request("session ids use letters, digits, '-' and '_'"));
    }
    if let Some(s) = state.sessions.lock().await.get(&id) {
        return Ok(s.clone());
    }
    let root = state.root.clone();
    let key = id.clone();
    let loaded = tokio::task::spawn_blocking(move || load_session(root, key))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;
    let mut map = state.sessions.lock().await;
    Ok(map.entry(id).or_insert_with(|| Arc::new(Mutex::new(loaded))).clone())
}

/// Runs `f` with exclusive access to the session on a blocking thread.
async fn with_session<T: Send + 'static>(
    state: &AppState,
    id: String,
    f: impl FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
) -> Result<T, ApiError> {
    let s = session(state, id).await?;
    tokio::task::spawn_blocking(move || {
        let mut guard = s.lock().unwrap_or_else(|e| e.into_inner());
        f(&mut guard)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeshView {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
}

impl From<&SurfaceMesh> for MeshView {
    fn from(m: &SurfaceMesh) -> Self {
        Self {
            vertices: m.vertices().to_vec(),
            faces: m.faces().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PatchView {
    pub patch_id: usize,
    pub vertices: Vec<usize>,
    /// Axis polyline on the body.
    pub axis: Vec<Vec3>,
    pub axis_length: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObjectView {
    pub object_id: String,
    pub scale: f64,
    pub mesh: MeshView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusView {
    pub committed: Vec<usize>,
    pub pending: Option<usize>,
    pub undo_depth: usize,
}

/// Image reference, body with contact patches and axes, and the object.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionView {
    pub session_id: String,
    pub image_id: String,
    pub image_path: String,
    pub body: MeshView,
    pub contacts: BTreeSet<usize>,
    pub patches: Vec<PatchView>,
    /// Patches too small for an axis.
    pub skipped_patches: Vec<usize>,
    pub object: ObjectView,
    pub status: StatusView,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferRequest {
    pub patch_id: usize,
    /// Axis start on the object.
    pub click1: SurfacePoint,
    /// Second click in the object frame, giving the axis direction.
    pub click2: Vec3,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransferView {
    pub patch_id: usize,
    /// Transferred points in the object frame.
    pub points: Vec<Vec3>,
    pub surface_points: Vec<SurfacePoint>,
    pub correspondences: CorrespondenceSet,
    pub target_axis: Vec<Vec3>,
    /// Body vertices that could not be placed.
    pub failed: Vec<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CommitRequest {
    pub patch_id: usize,
}

fn status(s: &Session) -> StatusView {
    StatusView {
        committed: s.state.committed_ids(),
        pending: s.state.pending_id(),
        undo_depth: s.state.undo_depth(),
    }
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionView>, ApiError> {
    with_session(&state, id, |s| {
        Ok(Json(SessionView {
            session_id: s.id.clone(),
            image_id: s.assets.image_id.clone(),
            image_path: s.assets.image_path.clone(),
            body: (&s.body).into(),
            contacts: s.contacts.clone(),
            patches: s
                .patches
                .iter()
                .map(|p| PatchView {
                    patch_id: p.patch.id,
                    vertices: p.patch.vertices.clone(),
                    axis: p.axis.path.positions().to_vec(),
                    axis_length: p.axis.length(),
                })
                .collect(),
            skipped_patches: s.skipped.clone(),
            object: ObjectView {
                object_id: s.assets.object_id.clone(),
                scale: s.assets.object_scale,
                mesh: (&s.object).into(),
            },
            status: status(s),
        }))
    })
    .await
}

async fn post_transfer(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<TransferRequest>,
) -> Result<Json<TransferView>, ApiError> {
    with_session(&state, id, move |s| {
        let source = s
            .patches
            .iter()
            .find(|p| p.patch.id == req.patch_id)
            .ok_or_else(|| ApiError::bad_request(format!("unknown patch {}", req.patch_id)))?;
        let clicks = Clicks {
            start: req.click1,
            direction: req.click2,
        };
        let scale = s.assets.object_scale;
        let (axis, transfer) = place_patch(&s.scaled, scale, source, &clicks)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        let view = TransferView {
            patch_id: req.patch_id,
            points: transfer.points.iter().map(|p| s.object.position(p)).collect(),
            surface_points: transfer.points.clone(),
            correspondences: transfer.correspondences.clone(),
            target_axis: axis.path.positions().iter().map(|p| p / scale).collect(),
            failed: transfer.failed.clone(),
        };
        let record = patch_record(source, &s.assets.object_id, clicks, axis, transfer);
        s.state.propose(record);
        Ok(Json(view))
    })
    .await
}

async fn post_commit(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(req): Json<CommitRequest>,
) -> Result<Json<StatusView>, ApiError> {
    with_session(&state, id, move |s| {
        s.state.commit(req.patch_id)?;
        s.updated = now();
        Ok(Json(status(s)))
    })
    .await
}

async fn post_undo(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<StatusView>, ApiError> {
    with_session(&state, id, |s| {
        s.state.undo()?;
        s.updated = now();
        Ok(Json(status(s)))
    })
    .await
}

async fn get_export(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Json<AnnotationDocument>, ApiError> {
    with_session(&state, id, |s| {
        let mut doc = AnnotationDocument::new(s.assets.image_id.clone(), s.contacts.clone());
        doc.image_path = s.assets.image_path.clone();
        doc.patches = s.state.committed.values().cloned().collect();
        doc.created = s.created.clone();
        doc.updated = s.updated.clone();
        Ok(Json(doc))
    })
    .await
}

/// Routes over session directories under `root`.
pub fn router(root: PathBuf) -> Router {
    let state = AppState {
        root,
        sessions: Arc::default(),
    };
    Router::new()
        .route("/session/{id}", get(get_session))
        .route("/session/{id}/transfer", post(post_transfer))
        .route("/session/{id}/commit", post(post_commit))
        .route("/session/{id}/undo", post(post_undo))
        .route("/session/{id}/export", get(get_export))
        .with_state(state)
}
