//! C ABI over the session engine.
//!
//! Handles are opaque pointers owned by the caller and released with the
//! matching `_free` function. Every call returns a [`StepwiseStatus`]; on
//! failure, [`stepwise_last_error`] describes what went wrong on the
//! calling thread. Strings handed out are NUL-terminated UTF-8 and must be
//! released with [`stepwise_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use stepwise::engine::{export_session, Engine, EngineError};
use stepwise::model::{load_script, ModelError, ScriptedBackend};
use stepwise::protocol::render_chain;
use stepwise::store::SessionEnvelope;
use stepwise::{ExportFormat, Session, SessionConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepwiseStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    InvalidFixture = 4,
    Model = 5,
    NotAccepting = 6,
    Engine = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepwiseFormat {
    Markdown = 0,
    Json = 1,
}

/// Opaque scripted model backend.
pub struct StepwiseBackend {
    inner: ScriptedBackend,
}

/// Opaque session.
pub struct StepwiseSession {
    inner: Session,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(StepwiseStatus, String);

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        let status = match &e {
            EngineError::Model(_) => StepwiseStatus::Model,
            EngineError::NotAcceptingInput(_) => StepwiseStatus::NotAccepting,
            EngineError::EmptyQuery | EngineError::InvalidConfig(_) => StepwiseStatus::InvalidArgument,
            _ => StepwiseStatus::Engine,
        };
        Failure(status, e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match e {
            ModelError::FixtureSchema(_) => StepwiseStatus::InvalidFixture,
            _ => StepwiseStatus::Model,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(message));
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> StepwiseStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => StepwiseStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".to_string());
            StepwiseStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure(StepwiseStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(StepwiseStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(StepwiseStatus::NullArgument, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure(StepwiseStatus::NullArgument, format!("{what} is null")));
    }
    out.write(value);
    Ok(())
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("NULs removed").into_raw()
}

fn messages_json(messages: &[String]) -> *mut c_char {
    c_string(serde_json::to_string(messages).expect("strings serialize"))
}

/// Describes the last failure on this thread, or NULL. The pointer stays
/// valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn stepwise_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn stepwise_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a scripted backend from a JSON script (`model` plus `entries`).
///
/// # Safety
/// `fixture_json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn stepwise_backend_from_script(
    fixture_json: *const c_char,
    out: *mut *mut StepwiseBackend,
) -> StepwiseStatus {
    guard(|| {
        let source = text(fixture_json, "fixture_json")?;
        let inner = load_script(source)?;
        write_out(out, Box::into_raw(Box::new(StepwiseBackend { inner })), "out")
    })
}

/// # Safety
/// `backend` must come from `stepwise_backend_from_script` and not be freed
/// twice. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn stepwise_backend_free(backend: *mut StepwiseBackend) {
    if !backend.is_null() {
        drop(Box::from_raw(backend));
    }
}

/// Starts a session and drafts the first chain. `config_json` may be NULL
/// for defaults. `out_messages`, if not NULL, receives a JSON array of the
/// messages to show the user.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_start(
    backend: *const StepwiseBackend,
    session_id: *const c_char,
    query: *const c_char,
    config_json: *const c_char,
    out_session: *mut *mut StepwiseSession,
    out_messages: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let backend = handle(backend, "backend")?;
        let id = text(session_id, "session_id")?;
        let query = text(query, "query")?;
        let config: SessionConfig = if config_json.is_null() {
            SessionConfig::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?)
                .map_err(|e| Failure(StepwiseStatus::InvalidArgument, format!("config_json: {e}")))?
        };
        if out_session.is_null() {
            return Err(Failure(StepwiseStatus::NullArgument, "out_session is null".into()));
        }
        let outcome = Engine::new(&backend.inner).start_session_with_id(id, query, config)?;
        if !out_messages.is_null() {
            out_messages.write(messages_json(&outcome.messages));
        }
        out_session.write(Box::into_raw(Box::new(StepwiseSession { inner: outcome.session })));
        Ok(())
    })
}

/// Restores a session from its persisted JSON envelope.
///
/// # Safety
/// Pointers must be valid; `envelope_json` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_from_json(
    envelope_json: *const c_char,
    out_session: *mut *mut StepwiseSession,
) -> StepwiseStatus {
    guard(|| {
        let source = text(envelope_json, "envelope_json")?;
        let envelope: SessionEnvelope = serde_json::from_str(source)
            .map_err(|e| Failure(StepwiseStatus::InvalidArgument, e.to_string()))?;
        envelope
            .verify()
            .map_err(|e| Failure(StepwiseStatus::InvalidArgument, e.to_string()))?;
        write_out(
            out_session,
            Box::into_raw(Box::new(StepwiseSession { inner: envelope.session })),
            "out_session",
        )
    })
}

/// Feeds one user utterance. On success the session is updated in place;
/// on failure it is left exactly as it was.
///
/// # Safety
/// Pointers must be valid; `utterance` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_handle(
    backend: *const StepwiseBackend,
    session: *mut StepwiseSession,
    utterance: *const c_char,
    out_messages: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let backend = handle(backend, "backend")?;
        let utterance = text(utterance, "utterance")?;
        let session = session
            .as_mut()
            .ok_or_else(|| Failure(StepwiseStatus::NullArgument, "session is null".into()))?;
        let outcome = Engine::new(&backend.inner).handle_utterance(&session.inner, utterance)?;
        if !out_messages.is_null() {
            out_messages.write(messages_json(&outcome.messages));
        }
        session.inner = outcome.session;
        Ok(())
    })
}

/// Writes the lifecycle state name, e.g. "AwaitingReview".
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_state(
    session: *const StepwiseSession,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let session = handle(session, "session")?;
        write_out(out, c_string(format!("{:?}", session.inner.state())), "out")
    })
}

/// Writes the current chain in its canonical `[Step N] text` form.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_chain(
    session: *const StepwiseSession,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let session = handle(session, "session")?;
        write_out(out, c_string(render_chain(session.inner.chain())), "out")
    })
}

/// Writes the session as Markdown or as its JSON envelope.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_export(
    session: *const StepwiseSession,
    format: StepwiseFormat,
    out: *mut *mut c_char,
) -> StepwiseStatus {
    guard(|| {
        let session = handle(session, "session")?;
        let format = match format {
            StepwiseFormat::Markdown => ExportFormat::Markdown,
            StepwiseFormat::Json => ExportFormat::Json,
        };
        write_out(out, c_string(export_session(&session.inner, format)), "out")
    })
}

/// # Safety
/// `session` must come from this library and not be freed twice. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn stepwise_session_free(session: *mut StepwiseSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}
