//! Frames exchanged with play clients over the session stream.
//!
//! Client to server: one [`WireEvent`] per text frame.
//! Server to client: one [`ServerFrame`] per text frame, tagged by `type`.

use crate::agents::AgentSnapshot;
use crate::fuzzy::DegreeVector;
use crate::runtime::{ActionLogEntry, Event, EventKind, RuntimeError, SessionState, Status, SCHEMA_VERSION};
use serde::{Deserialize, Serialize};

/// An [`Event`] as sent by a client. A missing `t` is stamped by the server:
/// ticks advance the clock by one, everything else lands on the current tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireEvent {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<u64>,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl WireEvent {
    pub fn new(kind: EventKind) -> Self {
        WireEvent { session_id: None, t: None, kind }
    }

    pub fn stamp(self, clock: u64) -> Event {
        let t = self.t.unwrap_or(match self.kind {
            EventKind::Tick => clock + 1,
            _ => clock,
        });
        Event { t, kind: self.kind }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireUpdate {
    pub schema_version: u32,
    pub session_id: String,
    /// Session clock after the event.
    pub t: u64,
    pub scene: String,
    pub step: String,
    /// Log entries produced by the event; the whole log in the first update
    /// of a connection.
    pub entries: Vec<ActionLogEntry>,
    pub degrees: Vec<DegreeVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_degrees: Option<DegreeVector>,
    pub agents: Vec<AgentSnapshot>,
    pub status: Status,
}

impl WireUpdate {
    pub fn from_state(session_id: &str, state: &SessionState, entries: Vec<ActionLogEntry>) -> Self {
        WireUpdate {
            schema_version: SCHEMA_VERSION,
            session_id: session_id.to_string(),
            t: state.clock,
            scene: state.scene_id().to_string(),
            step: state.step_id().to_string(),
            entries,
            degrees: state.degree_vectors().cloned().collect(),
            rule_degrees: state.rule_degrees().cloned(),
            agents: state.agent_view().to_vec(),
            status: state.status,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    UnknownSession,
    StaleEvent,
    Malformed,
    SessionEnded,
    /// The script could not carry out the event (an unmet precondition).
    Runtime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub schema_version: u32,
    pub code: ErrorCode,
    pub message: String,
}

impl WireError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        WireError { schema_version: SCHEMA_VERSION, code, message: message.into() }
    }
}

impl From<&RuntimeError> for WireError {
    fn from(e: &RuntimeError) -> Self {
        let code = match e {
            RuntimeError::StaleEvent { .. } => ErrorCode::StaleEvent,
            RuntimeError::SessionEnded => ErrorCode::SessionEnded,
            RuntimeError::UnknownVariable(_) | RuntimeError::MalformedEvent(_) | RuntimeError::UnknownAction(_) => {
                ErrorCode::Malformed
            }
            _ => ErrorCode::Runtime,
        };
        WireError::new(code, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerFrame {
    Update(WireUpdate),
    Error(WireError),
}

impl ServerFrame {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("frame serializes")
    }
}

/// Reply to session creation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub schema_version: u32,
    pub session_id: String,
    /// Seconds since the Unix epoch.
    pub created_at: u64,
    pub seed: u64,
}

/// Optional body of a session creation request.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CreateSession {
    pub seed: Option<u64>,
}
