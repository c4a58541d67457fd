//! C ABI over the zelig engine.
//!
//! Scripts and sessions are opaque handles. Every fallible call returns a
//! [`ZeligStatus`]; on failure [`zelig_last_error`] holds a message for the
//! calling thread. Strings handed out by the library are NUL-terminated UTF-8
//! and must be released with [`zelig_string_free`]. Structured data crosses
//! the boundary as JSON, in the same shapes the session service uses.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use zelig::runtime::{parse_trace, render_log, RuntimeError, Status};
use zelig::script::{LoadError, ScriptDoc};
use zelig::wire::{WireEvent, WireUpdate};
use zelig::{RuntimeConfig, SessionState};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ZeligStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Parse = 5,
    InvalidScript = 6,
    MalformedEvent = 7,
    StaleEvent = 8,
    SessionEnded = 9,
    Runtime = 10,
    Panic = 11,
}

/// A parsed script with its imports merged in.
pub struct ZeligScript {
    doc: ScriptDoc,
}

/// A running session. Not safe to share between threads without locking.
pub struct ZeligSession {
    state: SessionState,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(ZeligStatus, String);

impl From<&RuntimeError> for Fail {
    fn from(e: &RuntimeError) -> Self {
        let status = match e {
            RuntimeError::InvalidScript(_) => ZeligStatus::InvalidScript,
            RuntimeError::InvalidConfig(_) => ZeligStatus::InvalidArgument,
            RuntimeError::SessionEnded => ZeligStatus::SessionEnded,
            RuntimeError::StaleEvent { .. } => ZeligStatus::StaleEvent,
            RuntimeError::UnknownVariable(_) | RuntimeError::UnknownAction(_) | RuntimeError::MalformedEvent(_) => {
                ZeligStatus::MalformedEvent
            }
            RuntimeError::UnmetPrecondition { .. } => ZeligStatus::Runtime,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> ZeligStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(None);
            ZeligStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(Some(msg));
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(Some(format!("internal error: {msg}")));
            ZeligStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(ZeligStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Fail(ZeligStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn put<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(ZeligStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|e| Fail(ZeligStatus::Runtime, e.to_string()))?;
    put(out, c.into_raw(), "output pointer")
}

unsafe fn config(json: *const c_char) -> Result<RuntimeConfig, Fail> {
    if json.is_null() {
        return Ok(RuntimeConfig::default());
    }
    let json = text(json, "config")?;
    serde_json::from_str(json).map_err(|e| Fail(ZeligStatus::InvalidArgument, format!("config: {e}")))
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, Fail> {
    serde_json::to_string(v).map_err(|e| Fail(ZeligStatus::Runtime, e.to_string()))
}

unsafe fn script<'a>(p: *const ZeligScript) -> Result<&'a ScriptDoc, Fail> {
    p.as_ref().map(|s| &s.doc).ok_or(Fail(ZeligStatus::NullArgument, "script is null".into()))
}

unsafe fn session<'a>(p: *mut ZeligSession) -> Result<&'a mut SessionState, Fail> {
    p.as_mut().map(|s| &mut s.state).ok_or(Fail(ZeligStatus::NullArgument, "session is null".into()))
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. Valid until the next call into the library.
#[no_mangle]
pub extern "C" fn zelig_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static version string.
#[no_mangle]
pub extern "C" fn zelig_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn zelig_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses script source. Imports are not resolved; use
/// [`zelig_script_load`] for files that import others.
///
/// # Safety
/// `source` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_script_parse(source: *const c_char, out: *mut *mut ZeligScript) -> ZeligStatus {
    guard(|| {
        let src = text(source, "source")?;
        let doc = zelig::parse_script(src).map_err(|e| Fail(ZeligStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(ZeligScript { doc })), "out")
    })
}

/// Reads a script file and merges its imports.
///
/// # Safety
/// `path` must be a valid C string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_script_load(path: *const c_char, out: *mut *mut ZeligScript) -> ZeligStatus {
    guard(|| {
        let path = text(path, "path")?;
        let doc = zelig::load_script(path).map_err(|e| {
            let status = match e {
                LoadError::Io { .. } => ZeligStatus::Io,
                _ => ZeligStatus::Parse,
            };
            Fail(status, e.to_string())
        })?;
        put(out, Box::into_raw(Box::new(ZeligScript { doc })), "out")
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn zelig_script_free(s: *mut ZeligScript) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Validates a script. Writes one tab-separated record per finding
/// (severity, code, line, message) to `records`, which may be NULL.
/// Returns `ZELIG_STATUS_INVALID_SCRIPT` when any finding is an error.
///
/// # Safety
/// `s` must be a live script handle; `records` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_script_validate(s: *const ZeligScript, records: *mut *mut c_char) -> ZeligStatus {
    guard(|| {
        let report = zelig::validate_script(script(s)?);
        if !records.is_null() {
            put_string(records, report.to_records())?;
        }
        if report.is_valid() {
            Ok(())
        } else {
            Err(Fail(ZeligStatus::InvalidScript, report.to_string()))
        }
    })
}

/// Scores an utterance against the script's intent lexicon. Writes a JSON
/// array of `{intent_id, degree, best_phrase}` sorted by degree.
///
/// # Safety
/// `s` must be a live script handle, `utterance` a valid C string and `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_match_intent(
    s: *const ZeligScript,
    utterance: *const c_char,
    out: *mut *mut c_char,
) -> ZeligStatus {
    guard(|| {
        let lexicon = script(s)?.lexicon();
        let matches = zelig::intent::match_intent(text(utterance, "utterance")?, &lexicon);
        put_string(out, to_json(&matches)?)
    })
}

/// Starts a session. `config_json` is NULL for defaults or a JSON object with
/// any of `theta_fire`, `tau_notp`, `max_ticks`, `intent_threshold`,
/// `agent_idle`, `agents`.
///
/// # Safety
/// `s` must be a live script handle, `config_json` NULL or a valid C string,
/// `out` writable. The session does not borrow the script.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_start(
    s: *const ZeligScript,
    config_json: *const c_char,
    seed: u64,
    out: *mut *mut ZeligSession,
) -> ZeligStatus {
    guard(|| {
        let state = zelig::start_session(script(s)?, config(config_json)?, seed).map_err(|e| Fail::from(&e))?;
        put(out, Box::into_raw(Box::new(ZeligSession { state })), "out")
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_free(s: *mut ZeligSession) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Feeds one event, e.g. `{"kind":"utterance","payload":"hello"}`. Without a
/// `t` a tick is stamped one past the clock and anything else at the clock.
/// On success `update` (may be NULL) receives the wire update carrying the
/// new log entries. A rejected event leaves the session unchanged.
///
/// # Safety
/// `s` must be a live session handle, `event_json` a valid C string and
/// `update` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_handle_event(
    s: *mut ZeligSession,
    event_json: *const c_char,
    update: *mut *mut c_char,
) -> ZeligStatus {
    guard(|| {
        let state = session(s)?;
        let json = text(event_json, "event")?;
        let ev: WireEvent =
            serde_json::from_str(json).map_err(|e| Fail(ZeligStatus::MalformedEvent, format!("event: {e}")))?;
        let entries = state.handle_event(&ev.stamp(state.clock)).map_err(|e| Fail::from(&e))?;
        if !update.is_null() {
            put_string(update, to_json(&WireUpdate::from_state("", state, entries))?)?;
        }
        Ok(())
    })
}

/// Writes a wire update holding the whole log so far.
///
/// # Safety
/// `s` must be a live session handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_snapshot(s: *mut ZeligSession, out: *mut *mut c_char) -> ZeligStatus {
    guard(|| {
        let state = session(s)?;
        let update = WireUpdate::from_state("", state, state.log.clone());
        put_string(out, to_json(&update)?)
    })
}

/// Writes the session's action log as JSON Lines, header first.
///
/// # Safety
/// `s` must be a live session handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_log(s: *mut ZeligSession, out: *mut *mut c_char) -> ZeligStatus {
    guard(|| {
        let state = session(s)?;
        put_string(out, render_log(&state.log_header(), &state.log))
    })
}

/// Current clock, or 0 for a NULL handle.
///
/// # Safety
/// `s` must be NULL or a live session handle.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_clock(s: *const ZeligSession) -> u64 {
    s.as_ref().map_or(0, |s| s.state.clock)
}

/// True once the session has reached END. NULL counts as ended.
///
/// # Safety
/// `s` must be NULL or a live session handle.
#[no_mangle]
pub unsafe extern "C" fn zelig_session_ended(s: *const ZeligSession) -> bool {
    s.as_ref().is_none_or(|s| s.state.status == Status::Ended)
}

/// Runs a JSON Lines trace from a fresh session and writes the resulting
/// log, exactly as `zelig run` prints it.
///
/// # Safety
/// `s` must be a live script handle, `trace_jsonl` a valid C string,
/// `config_json` NULL or a valid C string, `log_out` writable.
#[no_mangle]
pub unsafe extern "C" fn zelig_run_trace(
    s: *const ZeligScript,
    trace_jsonl: *const c_char,
    config_json: *const c_char,
    seed: u64,
    log_out: *mut *mut c_char,
) -> ZeligStatus {
    guard(|| {
        let doc = script(s)?;
        let trace =
            parse_trace(text(trace_jsonl, "trace")?).map_err(|e| Fail(ZeligStatus::MalformedEvent, e.to_string()))?;
        let state = zelig::run_trace(doc, &trace, config(config_json)?, seed).map_err(|e| {
            let Fail(status, _) = Fail::from(e.runtime());
            Fail(status, e.to_string())
        })?;
        put_string(log_out, render_log(&state.log_header(), &state.log))
    })
}

/// 1 − max(degrees). NaN if `degrees` is NULL while `len` is not 0.
///
/// # Safety
/// `degrees` must point to `len` doubles, or be NULL with `len` 0.
#[no_mangle]
pub unsafe extern "C" fn zelig_notp_degree(degrees: *const f64, len: usize) -> f64 {
    if len == 0 {
        return zelig::fuzzy::notp_degree(&[]);
    }
    if degrees.is_null() {
        return f64::NAN;
    }
    zelig::fuzzy::notp_degree(std::slice::from_raw_parts(degrees, len))
}

/// Necessity of a proposition from the possibility of its negation.
#[no_mangle]
pub extern "C" fn zelig_necessity(pos_of_negation: f64) -> f64 {
    zelig::fuzzy::necessity_from(pos_of_negation)
}
