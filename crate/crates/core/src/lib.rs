//! Fuzzy interactive-drama engine.
//!
//! Scripts are written in the `.drama` language ([`script`]), validated, and
//! executed by a deterministic event-driven [`runtime`]. Participant input is
//! fuzzified ([`fuzzy`], [`intent`]) and routed through rule blocks and
//! decision matrices ([`matrix`]); non-participant characters get an advisory
//! behavior-network layer ([`agents`]).

pub mod agents;
pub mod fuzzy;
pub mod intent;
pub mod matrix;
pub mod runtime;
pub mod script;
pub mod source;
pub mod wire;

#[cfg(feature = "server")]
pub mod service;

pub use fuzzy::{DegreeVector, LinguisticVariable, NOTP};
pub use runtime::{run_trace, start_session, Event, EventKind, RuntimeConfig, SessionState};
pub use script::{load_script, parse_script, validate_script, ScriptDoc};
