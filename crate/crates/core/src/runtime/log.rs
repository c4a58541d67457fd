use super::event::SCHEMA_VERSION;
use crate::fuzzy::DegreeVector;
use serde::{Deserialize, Serialize};

/// Performer of ambient descriptions and the END marker.
pub const NARRATOR: &str = "narrator";
pub const AMBIENT_ACTION: &str = "ambient";
pub const END_ACTION: &str = "END";

/// Why a log entry happened.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Cause {
    Ambient {
        scene: String,
    },
    Stated {
        scene: String,
        step: String,
    },
    /// `path` holds 1-based rule positions from the outer block inwards.
    Rule {
        scene: String,
        step: String,
        path: Vec<usize>,
    },
    Notp {
        scene: String,
        step: String,
        path: Vec<usize>,
    },
    Matrix {
        matrix: String,
        row: String,
        col: String,
        score: f64,
    },
    Bracket {
        scene: String,
        step: String,
        needed_by: String,
    },
    Agent {
        module: String,
    },
    End {
        scene: String,
        step: String,
    },
}

impl Cause {
    pub fn label(&self) -> &'static str {
        match self {
            Cause::Ambient { .. } => "ambient",
            Cause::Stated { .. } => "stated",
            Cause::Rule { .. } => "rule",
            Cause::Notp { .. } => "notp",
            Cause::Matrix { .. } => "matrix",
            Cause::Bracket { .. } => "bracket",
            Cause::Agent { .. } => "agent",
            Cause::End { .. } => "end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionLogEntry {
    pub t: u64,
    pub seq: u64,
    pub action: String,
    pub performer: String,
    pub cause: Cause,
    pub text: String,
    /// Degrees that triggered the entry; empty for unconditional entries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degrees: Vec<DegreeVector>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogHeader {
    pub schema_version: u32,
    #[serde(rename = "type")]
    pub kind: String,
    pub title: String,
    pub seed: u64,
    pub theta_fire: f64,
    pub tau_notp: u64,
}

impl LogHeader {
    pub fn new(title: &str, seed: u64, theta_fire: f64, tau_notp: u64) -> Self {
        Self { schema_version: SCHEMA_VERSION, kind: "log".into(), title: title.into(), seed, theta_fire, tau_notp }
    }
}

/// Header record then one entry per line.
pub fn render_log(header: &LogHeader, entries: &[ActionLogEntry]) -> String {
    let mut out = serde_json::to_string(header).expect("header serializes");
    out.push('\n');
    for e in entries {
        out.push_str(&serde_json::to_string(e).expect("entry serializes"));
        out.push('\n');
    }
    out
}

pub fn parse_log(text: &str) -> Result<(LogHeader, Vec<ActionLogEntry>), serde_json::Error> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = serde_json::from_str(lines.next().unwrap_or(""))?;
    let entries = lines.map(serde_json::from_str).collect::<Result<_, _>>()?;
    Ok((header, entries))
}
