use serde::{Deserialize, Serialize};

/// Version stamped into trace, log and wire records.
pub const SCHEMA_VERSION: u32 = 1;

/// A timestamped participant input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: u64,
    #[serde(flatten)]
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum EventKind {
    Utterance(String),
    Intensity { variable: String, x: f64 },
    Move(String),
    Tick,
}

impl Event {
    pub fn new(t: u64, kind: EventKind) -> Self {
        Self { t, kind }
    }

    pub fn tick(t: u64) -> Self {
        Self { t, kind: EventKind::Tick }
    }

    pub fn utterance(t: u64, text: impl Into<String>) -> Self {
        Self { t, kind: EventKind::Utterance(text.into()) }
    }

    pub fn intensity(t: u64, variable: impl Into<String>, x: f64) -> Self {
        Self { t, kind: EventKind::Intensity { variable: variable.into(), x } }
    }

    pub fn moved(t: u64, zone: impl Into<String>) -> Self {
        Self { t, kind: EventKind::Move(zone.into()) }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("trace line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

#[derive(Serialize, Deserialize)]
struct TraceHeader {
    schema_version: u32,
    #[serde(rename = "type")]
    kind: String,
}

/// Reads a JSON Lines trace. An optional first record carries the schema
/// version; blank lines are skipped.
pub fn parse_trace(text: &str) -> Result<Vec<Event>, TraceError> {
    let mut events = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(line).map_err(|e| TraceError { line: i + 1, message: e.to_string() })?;
        if let Some(v) = value.get("schema_version") {
            if v.as_u64() != Some(SCHEMA_VERSION as u64) {
                return Err(TraceError { line: i + 1, message: format!("unsupported schema_version {v}") });
            }
            continue;
        }
        let ev: Event =
            serde_json::from_value(value).map_err(|e| TraceError { line: i + 1, message: e.to_string() })?;
        events.push(ev);
    }
    Ok(events)
}

pub fn render_trace(events: &[Event]) -> String {
    let header = TraceHeader { schema_version: SCHEMA_VERSION, kind: "trace".into() };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}
