//! HTTP service for the pairwise human-judgment study.
//!
//! Endpoints:
//!
//! * `GET /api/session` issues a session id.
//! * `GET /api/pairs/next?session=S` returns the next unjudged pair of `S`.
//!   Each session sees the pairs in its own seeded order.
//! * `POST /api/judgments` records one judgment, durably, before answering.
//! * `GET /api/stats` reports per-session and overall accuracy.
//! * `GET /img/{id}` serves a submission image.
//!
//! Anything else falls through to the static UI assets when configured.
//! Labels and scores never leave the server.

pub mod api;
mod pairs;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use pairpop_core::Label;
use serde::Deserialize;
use tower_http::services::ServeDir;

pub use pairs::{PairSet, ServedPair};
pub use store::session_id;

use api::{ApiError, Judgment, JudgmentAck, JudgmentRequest, NextPair, SessionInfo, Stats};
use store::{Rejection, Store};

#[derive(Debug, thiserror::Error)]
pub enum ServerError {
    #[error("{0}")]
    Data(String),
    #[error("judgment log line {line}: {reason}")]
    Log { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Clone)]
pub struct AppState {
    pairs: Arc<PairSet>,
    labels: Arc<HashMap<String, Label>>,
    store: Arc<Mutex<Store>>,
}

impl AppState {
    /// State backed by the judgment log at `log_path`, replayed if present.
    pub fn open(pairs: PairSet, log_path: &Path, seed: u64) -> Result<Self, ServerError> {
        if pairs.is_empty() {
            return Err(ServerError::Data("no pairs to serve".into()));
        }
        let store = Store::open(log_path, seed, |id| pairs.position(id), pairs.len())?;
        Ok(Self::with_store(pairs, store))
    }

    /// State without persistence.
    pub fn in_memory(pairs: PairSet, seed: u64) -> Self {
        let store = Store::in_memory(seed, pairs.len());
        Self::with_store(pairs, store)
    }

    fn with_store(pairs: PairSet, store: Store) -> Self {
        Self { labels: Arc::new(pairs.labels()), pairs: Arc::new(pairs), store: Arc::new(Mutex::new(store)) }
    }

    pub fn stats(&self) -> Stats {
        self.store.lock().expect("store lock").stats(&self.labels)
    }

    pub fn judgments(&self) -> Vec<Judgment> {
        self.store.lock().expect("store lock").judgments().to_vec()
    }
}

enum Failure {
    BadRequest(String),
    NotFound(String),
    Conflict(String),
    Internal(ServerError),
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        let (status, error) = match self {
            Failure::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
            Failure::NotFound(m) => (StatusCode::NOT_FOUND, m),
            Failure::Conflict(m) => (StatusCode::CONFLICT, m),
            Failure::Internal(e) => {
                log::error!("{e}");
                (StatusCode::INTERNAL_SERVER_ERROR, "internal error".to_owned())
            }
        };
        (status, Json(ApiError { error })).into_response()
    }
}

impl From<ServerError> for Failure {
    fn from(e: ServerError) -> Self {
        Failure::Internal(e)
    }
}

async fn new_session(State(st): State<AppState>) -> Result<Json<SessionInfo>, Failure> {
    let session_id = st.store.lock().expect("store lock").new_session()?;
    Ok(Json(SessionInfo { session_id, total: st.pairs.len() }))
}

#[derive(Deserialize)]
struct NextQuery {
    session: Option<String>,
}

async fn next_pair(State(st): State<AppState>, Query(q): Query<NextQuery>) -> Result<Json<NextPair>, Failure> {
    let session_id = q.session.ok_or_else(|| Failure::BadRequest("missing session parameter".into()))?;
    let store = st.store.lock().expect("store lock");
    let s = store.session(&session_id).ok_or_else(|| Failure::NotFound(format!("unknown session {session_id}")))?;
    let pair = s.next().map(|p| st.pairs.get(p).view());
    Ok(Json(NextPair { judged: s.n_judged, total: st.pairs.len(), pair, session_id }))
}

async fn post_judgment(State(st): State<AppState>, body: Bytes) -> Result<Json<JudgmentAck>, Failure> {
    let req: JudgmentRequest = serde_json::from_slice(&body).map_err(|e| Failure::BadRequest(format!("malformed judgment: {e}")))?;
    let position = st.pairs.position(&req.pair_id);
    let submitted_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs() as i64).unwrap_or(0);
    let judgment = Judgment {
        session_id: req.session_id,
        pair_id: req.pair_id,
        choice: req.choice,
        rationale: req.rationale.filter(|r| !r.trim().is_empty()),
        submitted_at,
    };
    let (session_id, pair_id) = (judgment.session_id.clone(), judgment.pair_id.clone());
    let outcome = st.store.lock().expect("store lock").record(judgment, position)?;
    match outcome {
        Ok(judged) => Ok(Json(JudgmentAck { judged, total: st.pairs.len() })),
        Err(Rejection::UnknownSession) => Err(Failure::NotFound(format!("unknown session {session_id}"))),
        Err(Rejection::UnknownPair) => Err(Failure::Conflict(format!("unknown pair {pair_id}"))),
        Err(Rejection::Duplicate) => Err(Failure::Conflict(format!("pair {pair_id} already judged in session {session_id}"))),
    }
}

async fn stats(State(st): State<AppState>) -> Json<Stats> {
    Json(st.stats())
}

fn content_type(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("gif") => "image/gif",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    }
}

async fn image(State(st): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, Failure> {
    let path = st.pairs.image_path(&id).ok_or_else(|| Failure::NotFound(format!("no image for {id}")))?;
    match tokio::fs::read(path).await {
        Ok(bytes) => Ok(([(header::CONTENT_TYPE, content_type(path))], bytes).into_response()),
        Err(e) => {
            log::warn!("image {}: {e}", path.display());
            Err(Failure::NotFound(format!("image for {id} unavailable")))
        }
    }
}

pub fn router(state: AppState, assets: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/session", get(new_session))
        .route("/api/pairs/next", get(next_pair))
        .route("/api/judgments", post(post_judgment))
        .route("/api/stats", get(stats))
        .route("/img/{id}", get(image))
        .with_state(state);
    match assets {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api,
    }
}

/// Serves until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app).await
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: SocketAddr, app: Router) -> std::io::Result<SocketAddr> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        if let Err(e) = serve(listener, app).await {
            log::error!("annotation service stopped: {e}");
        }
    });
    Ok(local)
}
