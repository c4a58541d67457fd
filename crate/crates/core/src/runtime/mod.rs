//! Deterministic, event-driven execution of a validated script.

mod event;
mod log;
mod session;
mod world;

pub use event::{parse_trace, render_trace, Event, EventKind, TraceError, SCHEMA_VERSION};
pub use log::{parse_log, render_log, ActionLogEntry, Cause, LogHeader, AMBIENT_ACTION, END_ACTION, NARRATOR};
pub use session::{resolve_consistency, run_trace, start_session, sync_plot_goal, SessionState, Status};
pub use world::{CharacterState, WorldState, ON_STAGE, ZONE};

use crate::agents::NetworkParams;
use crate::script::{Fact, ValidationReport};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuntimeConfig {
    /// Minimum rule or matrix-cell degree that fires.
    pub theta_fire: f64,
    /// Quiet ticks before a NOTP rule without an explicit latency fires.
    pub tau_notp: u64,
    /// Events stamped later than this are not processed.
    pub max_ticks: u64,
    /// Intent matches below this count as zero.
    pub intent_threshold: f64,
    /// Log idle behavior selected by the agent layer.
    pub agent_idle: bool,
    pub agents: NetworkParams,
}

impl Default for RuntimeConfig {
    fn default() -> Self {
        Self {
            theta_fire: 0.5,
            tau_notp: 10,
            max_ticks: 10_000,
            intent_threshold: crate::intent::DEFAULT_ACCEPTANCE,
            agent_idle: false,
            agents: NetworkParams::default(),
        }
    }
}

impl RuntimeConfig {
    pub fn check(&self) -> Result<(), RuntimeError> {
        if !(self.theta_fire > 0.0 && self.theta_fire <= 0.5) {
            return Err(RuntimeError::InvalidConfig(format!("theta_fire {} is outside (0, 0.5]", self.theta_fire)));
        }
        if self.tau_notp < 1 {
            return Err(RuntimeError::InvalidConfig("tau_notp must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.intent_threshold) {
            return Err(RuntimeError::InvalidConfig(format!(
                "intent_threshold {} is outside [0, 1]",
                self.intent_threshold
            )));
        }
        let a = &self.agents;
        if !(a.gamma >= 0.0
            && a.delta >= 0.0
            && (0.0..1.0).contains(&a.beta)
            && a.theta_exec >= 0.0
            && a.theta_decay >= 0.0)
        {
            return Err(RuntimeError::InvalidConfig("agent parameters must be non-negative with beta < 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RuntimeError {
    #[error("script has validation errors:\n{0}")]
    InvalidScript(ValidationReport),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("session has ended")]
    SessionEnded,
    #[error("event at t={t} is older than the session clock {clock}")]
    StaleEvent { t: u64, clock: u64 },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("unknown action `{0}`")]
    UnknownAction(String),
    #[error("malformed event: {0}")]
    MalformedEvent(String),
    #[error("action `{action}` needs `{fact}` and no consistency action establishes it")]
    UnmetPrecondition { action: String, fact: Fact },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TraceRunError {
    #[error("cannot start session: {0}")]
    Start(RuntimeError),
    #[error("event {index}: {source}")]
    Event { index: usize, source: RuntimeError },
}

impl TraceRunError {
    pub fn runtime(&self) -> &RuntimeError {
        match self {
            TraceRunError::Start(e) | TraceRunError::Event { source: e, .. } => e,
        }
    }
}
