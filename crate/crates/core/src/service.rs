//! HTTP and WebSocket host for live sessions.
//!
//! Routes:
//! - `POST /sessions` creates a session, body `{"seed": n}` optional
//! - `GET /sessions/{id}/play` upgrades to the event/update stream
//! - `GET /sessions/{id}/log` returns the action log as JSON Lines
//! - `GET /sessions/{id}/trace` returns the stamped events received so far
//!
//! Each session serializes its events behind one lock. A ticker feeds Tick
//! events while at least one client is connected. Sessions with no client
//! are dropped after a grace period.

use crate::runtime::{render_log, render_trace, start_session, Event, RuntimeConfig, RuntimeError, SessionState};
use crate::script::ScriptDoc;
use crate::wire::{CreateSession, ErrorCode, ServerFrame, SessionCreated, WireError, WireEvent, WireUpdate};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use std::collections::HashMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, SystemTime, UNIX_EPOCH};
use tokio::sync::{broadcast, mpsc};
use tokio::task::JoinHandle;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub runtime: RuntimeConfig,
    /// Wall-clock length of one tick; `None` disables the ticker.
    pub tick: Option<Duration>,
    /// How long a session survives without any connected client.
    pub grace: Duration,
    /// Directory for per-session trace files.
    pub log_dir: Option<PathBuf>,
    /// Updates buffered per client before a slow reader starts losing them.
    pub update_buffer: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            runtime: RuntimeConfig::default(),
            tick: Some(Duration::from_secs(1)),
            grace: Duration::from_secs(60),
            log_dir: None,
            update_buffer: 256,
        }
    }
}

pub struct Service {
    doc: ScriptDoc,
    config: ServiceConfig,
    sessions: Mutex<HashMap<String, Arc<Session>>>,
}

struct Session {
    id: String,
    live: tokio::sync::Mutex<Live>,
    updates: broadcast::Sender<Arc<str>>,
    clients: AtomicUsize,
    /// Bumped on every connect and disconnect so stale teardowns can tell.
    epoch: AtomicU64,
    ticker: Mutex<Option<JoinHandle<()>>>,
}

struct Live {
    state: SessionState,
    recorded: Vec<Event>,
    file: Option<std::fs::File>,
}

impl Service {
    /// Fails if the script does not validate or the config is out of range.
    pub fn new(doc: ScriptDoc, config: ServiceConfig) -> Result<Arc<Self>, RuntimeError> {
        start_session(&doc, config.runtime, 0)?;
        Ok(Arc::new(Service { doc, config, sessions: Mutex::new(HashMap::new()) }))
    }

    pub fn router(self: &Arc<Self>) -> Router {
        Router::new()
            .route("/sessions", post(create))
            .route("/sessions/:id/play", get(play))
            .route("/sessions/:id/log", get(log))
            .route("/sessions/:id/trace", get(trace))
            .with_state(self.clone())
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().unwrap().len()
    }

    pub fn create_session(self: &Arc<Self>, seed: u64) -> Result<SessionCreated, RuntimeError> {
        let state = start_session(&self.doc, self.config.runtime, seed)?;
        let id = uuid::Uuid::new_v4().simple().to_string();
        let file = self.config.log_dir.as_ref().and_then(|dir| {
            let path = dir.join(format!("{id}.trace.jsonl"));
            let opened = std::fs::OpenOptions::new().create(true).append(true).open(&path).and_then(|mut f| {
                f.write_all(render_trace(&[]).as_bytes())?;
                Ok(f)
            });
            opened.map_err(|e| tracing::warn!(path = %path.display(), "cannot open session file: {e}")).ok()
        });
        let (updates, _) = broadcast::channel(self.config.update_buffer.max(1));
        let session = Arc::new(Session {
            id: id.clone(),
            live: tokio::sync::Mutex::new(Live { state, recorded: Vec::new(), file }),
            updates,
            clients: AtomicUsize::new(0),
            epoch: AtomicU64::new(0),
            ticker: Mutex::new(None),
        });
        self.sessions.lock().unwrap().insert(id.clone(), session.clone());
        tracing::info!(session = %id, seed, "session created");
        self.schedule_teardown(&session);
        let created_at = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Ok(SessionCreated { schema_version: crate::runtime::SCHEMA_VERSION, session_id: id, created_at, seed })
    }

    fn get(&self, id: &str) -> Option<Arc<Session>> {
        self.sessions.lock().unwrap().get(id).cloned()
    }

    fn connect(self: &Arc<Self>, session: &Arc<Session>) {
        session.epoch.fetch_add(1, Ordering::SeqCst);
        if session.clients.fetch_add(1, Ordering::SeqCst) == 0 {
            if let Some(tick) = self.config.tick {
                let s = session.clone();
                let handle = tokio::spawn(async move {
                    let mut interval = tokio::time::interval(tick);
                    interval.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
                    interval.tick().await;
                    loop {
                        interval.tick().await;
                        match s.apply(WireEvent::new(crate::runtime::EventKind::Tick)).await {
                            Err(e) if e.code == ErrorCode::SessionEnded => break,
                            Err(e) => tracing::warn!(session = %s.id, "tick rejected: {}", e.message),
                            Ok(()) => {}
                        }
                    }
                });
                if let Some(old) = session.ticker.lock().unwrap().replace(handle) {
                    old.abort();
                }
            }
        }
    }

    fn disconnect(self: &Arc<Self>, session: &Arc<Session>) {
        session.epoch.fetch_add(1, Ordering::SeqCst);
        if session.clients.fetch_sub(1, Ordering::SeqCst) == 1 {
            if let Some(t) = session.ticker.lock().unwrap().take() {
                t.abort();
            }
            self.schedule_teardown(session);
        }
    }

    fn schedule_teardown(self: &Arc<Self>, session: &Arc<Session>) {
        let epoch = session.epoch.load(Ordering::SeqCst);
        let svc = Arc::downgrade(self);
        let s = Arc::downgrade(session);
        let grace = self.config.grace;
        tokio::spawn(async move {
            tokio::time::sleep(grace).await;
            let (Some(svc), Some(s)) = (svc.upgrade(), s.upgrade()) else { return };
            if s.clients.load(Ordering::SeqCst) == 0 && s.epoch.load(Ordering::SeqCst) == epoch {
                svc.sessions.lock().unwrap().remove(&s.id);
                tracing::info!(session = %s.id, "session torn down");
            }
        });
    }
}

impl Session {
    /// Stamps and applies one event, broadcasting the resulting update.
    async fn apply(&self, ev: WireEvent) -> Result<(), WireError> {
        if ev.session_id.as_ref().is_some_and(|sid| *sid != self.id) {
            return Err(WireError::new(ErrorCode::UnknownSession, "event addressed to another session"));
        }
        let mut live = self.live.lock().await;
        let ev = ev.stamp(live.state.clock);
        let entries = live.state.handle_event(&ev).map_err(|e| WireError::from(&e))?;
        if let Some(f) = live.file.as_mut() {
            let line = serde_json::to_string(&ev).expect("event serializes");
            if let Err(e) = writeln!(f, "{line}") {
                tracing::warn!(session = %self.id, "cannot append to session file: {e}");
            }
        }
        live.recorded.push(ev);
        let update = WireUpdate::from_state(&self.id, &live.state, entries);
        let _ = self.updates.send(ServerFrame::Update(update).to_json().into());
        Ok(())
    }
}

fn error_response(status: StatusCode, code: ErrorCode, message: impl Into<String>) -> Response {
    (status, Json(WireError::new(code, message))).into_response()
}

fn jsonl(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/x-ndjson")], body).into_response()
}

async fn create(State(svc): State<Arc<Service>>, body: Option<Json<CreateSession>>) -> Response {
    let seed = body.and_then(|Json(b)| b.seed).unwrap_or(0);
    match svc.create_session(seed) {
        Ok(created) => (StatusCode::CREATED, Json(created)).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, ErrorCode::Runtime, e.to_string()),
    }
}

async fn log(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Response {
    let Some(s) = svc.get(&id) else {
        return error_response(StatusCode::NOT_FOUND, ErrorCode::UnknownSession, format!("no session `{id}`"));
    };
    let live = s.live.lock().await;
    jsonl(render_log(&live.state.log_header(), &live.state.log))
}

async fn trace(State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Response {
    let Some(s) = svc.get(&id) else {
        return error_response(StatusCode::NOT_FOUND, ErrorCode::UnknownSession, format!("no session `{id}`"));
    };
    let live = s.live.lock().await;
    jsonl(render_trace(&live.recorded))
}

async fn play(ws: WebSocketUpgrade, State(svc): State<Arc<Service>>, Path(id): Path<String>) -> Response {
    ws.on_upgrade(move |socket| connection(svc, id, socket))
}

async fn connection(svc: Arc<Service>, id: String, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let Some(session) = svc.get(&id) else {
        let frame = ServerFrame::Error(WireError::new(ErrorCode::UnknownSession, format!("no session `{id}`")));
        let _ = sink.send(Message::Text(frame.to_json())).await;
        let _ = sink.close().await;
        return;
    };
    // subscribe under the lock so the snapshot and the stream do not overlap
    let (mut updates, hello) = {
        let live = session.live.lock().await;
        let rx = session.updates.subscribe();
        let snapshot = WireUpdate::from_state(&session.id, &live.state, live.state.log.clone());
        (rx, ServerFrame::Update(snapshot).to_json())
    };
    svc.connect(&session);
    let (direct, mut direct_rx) = mpsc::channel::<String>(32);
    let writer = tokio::spawn(async move {
        if sink.send(Message::Text(hello)).await.is_err() {
            return;
        }
        loop {
            let text = tokio::select! {
                m = direct_rx.recv() => match m {
                    Some(m) => m,
                    None => break,
                },
                u = updates.recv() => match u {
                    Ok(u) => u.to_string(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::warn!("client lagging, {n} updates dropped");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            };
            if sink.send(Message::Text(text)).await.is_err() {
                break;
            }
        }
    });
    while let Some(msg) = stream.next().await {
        let result = match msg {
            Ok(Message::Text(text)) => match serde_json::from_str::<WireEvent>(&text) {
                Ok(ev) => session.apply(ev).await,
                Err(e) => Err(WireError::new(ErrorCode::Malformed, e.to_string())),
            },
            Ok(Message::Binary(_)) => Err(WireError::new(ErrorCode::Malformed, "binary frames are not accepted")),
            Ok(Message::Close(_)) | Err(_) => break,
            Ok(_) => Ok(()),
        };
        if let Err(e) = result {
            tracing::debug!(session = %session.id, code = ?e.code, "{}", e.message);
            if direct.send(ServerFrame::Error(e).to_json()).await.is_err() {
                break;
            }
        }
    }
    drop(direct);
    writer.abort();
    svc.disconnect(&session);
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, svc: Arc<Service>) -> std::io::Result<()> {
    axum::serve(listener, svc.router()).await
}
