//! HTTP front end for live proactive recommendations.
//!
//! | method | path                     | body                          |
//! |--------|--------------------------|-------------------------------|
//! | POST   | `/sessions`              | `{expander, params?}` → `{id}` |
//! | POST   | `/sessions/{id}/context` | `{word, completed}` → [`ContextResponse`] |
//! | GET    | `/documents/{id}`        | stored document               |
//! | DELETE | `/sessions/{id}`         | none                          |
//!
//! Failures are returned as `{code, message}` with a matching status.

mod engine;
mod error;

use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use proactive_core::corpus::Document;
use proactive_core::proactive::ExpanderChoice;
use serde::{Deserialize, Serialize};
use tokio::net::TcpListener;
use uuid::Uuid;

pub use engine::{
    ContextResponse, Engine, Recommendation, Session, SessionParams, SessionStore, DEFAULT_IDLE_TIMEOUT,
    DEFAULT_WINDOW,
};
pub use error::{ErrorBody, ServiceError};

pub struct AppState {
    pub engine: Engine,
    pub sessions: SessionStore,
}

pub type SharedState = Arc<AppState>;

impl AppState {
    pub fn new(engine: Engine, idle_timeout: Duration) -> SharedState {
        Arc::new(Self {
            engine,
            sessions: SessionStore::new(idle_timeout),
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub expander: String,
    #[serde(default)]
    pub params: SessionParams,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub id: Uuid,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextUpdate {
    pub word: String,
    pub completed: bool,
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

fn session_id(raw: &str) -> Result<Uuid, ServiceError> {
    Uuid::parse_str(raw).map_err(|_| ServiceError::NotFound(format!("no session {raw:?}")))
}

async fn create_session(
    State(state): State<SharedState>,
    payload: Result<Json<CreateSession>, JsonRejection>,
) -> Result<impl IntoResponse, ServiceError> {
    let req = body(payload)?;
    let choice: ExpanderChoice = req
        .expander
        .parse()
        .map_err(|_| ServiceError::BadRequest(format!("unknown expander {:?}; use baseline, lm-beam or intent-linrel", req.expander)))?;
    let session = state.engine.new_session(choice, req.params)?;
    let id = state.sessions.insert(session);
    tracing::debug!(%id, expander = %choice, "session created");
    Ok((StatusCode::CREATED, Json(Created { id })))
}

async fn update_context(
    State(state): State<SharedState>,
    Path(raw): Path<String>,
    payload: Result<Json<ContextUpdate>, JsonRejection>,
) -> Result<Json<ContextResponse>, ServiceError> {
    let id = session_id(&raw)?;
    let req = body(payload)?;
    let session = state
        .sessions
        .get(&id)
        .ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))?;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || {
        let mut s = session.blocking_lock();
        worker.engine.update(&mut s, &req.word, req.completed)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))?
    .map(Json)
}

async fn delete_session(State(state): State<SharedState>, Path(raw): Path<String>) -> Result<StatusCode, ServiceError> {
    let id = session_id(&raw)?;
    if state.sessions.remove(&id) {
        Ok(StatusCode::NO_CONTENT)
    } else {
        Err(ServiceError::NotFound(format!("no session {id}")))
    }
}

async fn get_document(State(state): State<SharedState>, Path(id): Path<String>) -> Result<Json<Document>, ServiceError> {
    state
        .engine
        .document(&id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ServiceError::NotFound(format!("no document {id:?}")))
}

async fn fallback() -> ServiceError {
    ServiceError::NotFound("no such route".into())
}

pub fn router(state: SharedState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/context", post(update_context))
        .route("/sessions/{id}", axum::routing::delete(delete_session))
        .route("/documents/{id}", get(get_document))
        .fallback(fallback)
        .with_state(state)
}

/// Serves until the listener fails, expiring idle sessions in the background.
pub async fn serve(listener: TcpListener, state: SharedState) -> std::io::Result<()> {
    let period = (state.sessions.idle_timeout() / 2).clamp(Duration::from_millis(10), Duration::from_secs(60));
    let sweeper = state.clone();
    tokio::spawn(async move {
        let mut tick = tokio::time::interval(period);
        loop {
            tick.tick().await;
            let dropped = sweeper.sessions.sweep();
            if dropped > 0 {
                tracing::info!(dropped, "expired idle sessions");
            }
        }
    });
    axum::serve(listener, router(state)).await
}
