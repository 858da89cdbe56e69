//! HTTP API and server-sent event stream over the engine.

use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::stream::{self, Stream, StreamExt};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

use crate::command::ExportFormat;
use crate::engine::{export_session, Engine, EngineError, EngineOutcome};
use crate::lifecycle::SessionState;
use crate::model::Backend;
use crate::session::{Session, SessionConfig, TranscriptEvent};
use crate::store::{SessionEnvelope, SessionStore, StoreError};

const EVENT_BUFFER: usize = 1024;

struct Slot {
    /// Tokio's mutex is FIFO, so requests for one session run in arrival order.
    session: tokio::sync::Mutex<Session>,
    events: broadcast::Sender<TranscriptEvent>,
}

impl Slot {
    fn new(session: Session) -> Arc<Self> {
        let (events, _) = broadcast::channel(EVENT_BUFFER);
        Arc::new(Slot {
            session: tokio::sync::Mutex::new(session),
            events,
        })
    }
}

struct Inner {
    backend: Arc<dyn Backend>,
    store: SessionStore,
    defaults: SessionConfig,
    sessions: Mutex<HashMap<String, Arc<Slot>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    pub fn new(backend: Arc<dyn Backend>, store: SessionStore, defaults: SessionConfig) -> Self {
        AppState {
            inner: Arc::new(Inner {
                backend,
                store,
                defaults,
                sessions: Mutex::new(HashMap::new()),
            }),
        }
    }

    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        if let Some(slot) = self.inner.sessions.lock().unwrap().get(id) {
            return Ok(slot.clone());
        }
        let session = self.inner.store.load(id)?;
        let mut sessions = self.inner.sessions.lock().unwrap();
        Ok(sessions.entry(id.to_string()).or_insert_with(|| Slot::new(session)).clone())
    }
}

#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({"error": self.1}))).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        let status = match e {
            StoreError::NotFound(_) => StatusCode::NOT_FOUND,
            StoreError::InvalidId(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

impl From<EngineError> for ApiError {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::EmptyQuery | EngineError::InvalidConfig(_) => StatusCode::BAD_REQUEST,
            EngineError::NotAcceptingInput(_) | EngineError::IllegalTransition(_) => StatusCode::CONFLICT,
            EngineError::Model(_) => StatusCode::BAD_GATEWAY,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(status, e.to_string())
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateSession {
    pub query: String,
    #[serde(default)]
    pub config: Option<SessionConfig>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Created {
    pub session_id: String,
    pub messages: Vec<String>,
    pub state: SessionState,
}

#[derive(Debug, Deserialize)]
pub struct Utterance {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Reply {
    pub messages: Vec<String>,
    pub state: SessionState,
}

#[derive(Debug, Deserialize)]
pub struct ExportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

fn publish(slot: &Slot, session: &Session, from_seq: usize) {
    for event in &session.transcript()[from_seq..] {
        // no subscribers is fine
        let _ = slot.events.send(event.clone());
    }
}

async fn create_session(State(state): State<AppState>, Json(body): Json<CreateSession>) -> Result<Json<Created>, ApiError> {
    let config = body.config.unwrap_or_else(|| state.inner.defaults.clone());
    let inner = state.inner.clone();
    let outcome: EngineOutcome = tokio::task::spawn_blocking(move || {
        Engine::new(inner.backend.as_ref()).start_session(&body.query, config)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;

    state.inner.store.save(&outcome.session)?;
    let id = outcome.session.id().to_string();
    let slot = Slot::new(outcome.session.clone());
    publish(&slot, &outcome.session, 0);
    state.inner.sessions.lock().unwrap().insert(id.clone(), slot);
    Ok(Json(Created {
        session_id: id,
        messages: outcome.messages,
        state: outcome.session.state(),
    }))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<SessionEnvelope>, ApiError> {
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await.clone();
    Ok(Json(SessionEnvelope::new(session)))
}

async fn post_utterance(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<Utterance>,
) -> Result<Json<Reply>, ApiError> {
    let slot = state.slot(&id)?;
    let mut guard = slot.session.lock().await;
    let current = guard.clone();
    let inner = state.inner.clone();
    let outcome = tokio::task::spawn_blocking(move || {
        Engine::new(inner.backend.as_ref()).handle_utterance(&current, &body.text)
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))??;

    state.inner.store.save(&outcome.session)?;
    let from = guard.transcript().len();
    *guard = outcome.session;
    publish(&slot, &guard, from);
    Ok(Json(Reply {
        messages: outcome.messages,
        state: guard.state(),
    }))
}

async fn export(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<Response, ApiError> {
    let format: ExportFormat = match q.format.as_deref() {
        None => ExportFormat::Markdown,
        Some(f) => f.parse().map_err(|e: String| ApiError(StatusCode::BAD_REQUEST, e))?,
    };
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await.clone();
    let doc = export_session(&session, format);
    let content_type = match format {
        ExportFormat::Markdown => "text/markdown; charset=utf-8",
        ExportFormat::Json => "application/json",
    };
    Ok(([(header::CONTENT_TYPE, content_type)], doc).into_response())
}

/// Replays the transcript so far, then follows new events. Sequence
/// numbers are contiguous from zero.
pub fn event_stream(
    backlog: Vec<TranscriptEvent>,
    rx: broadcast::Receiver<TranscriptEvent>,
) -> impl Stream<Item = TranscriptEvent> {
    let next_seq = backlog.len() as u64;
    let live = stream::unfold((rx, next_seq), |(mut rx, next)| async move {
        loop {
            match rx.recv().await {
                Ok(event) if event.seq < next => continue,
                Ok(event) => {
                    let following = event.seq + 1;
                    return Some((event, (rx, following)));
                }
                Err(broadcast::error::RecvError::Lagged(_)) => continue,
                Err(broadcast::error::RecvError::Closed) => return None,
            }
        }
    });
    stream::iter(backlog).chain(live)
}

fn to_sse(event: TranscriptEvent) -> Result<Event, Infallible> {
    let value = serde_json::to_value(&event).expect("events serialize");
    let kind = value["kind"].as_str().unwrap_or("event").to_string();
    Ok(Event::default()
        .id(event.seq.to_string())
        .event(kind)
        .data(value.to_string()))
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    let slot = state.slot(&id)?;
    // snapshot and subscribe under the lock so nothing slips between them
    let (backlog, rx) = {
        let session = slot.session.lock().await;
        (session.transcript().to_vec(), slot.events.subscribe())
    };
    let stream = event_stream(backlog, rx).map(to_sse);
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/utterances", post(post_utterance))
        .route("/sessions/{id}/export", get(export))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

pub async fn serve(state: AppState, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}
