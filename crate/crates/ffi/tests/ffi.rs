use std::ffi::{c_char, CStr, CString};
use std::ptr;

use stepwise_ffi::*;

const FIXTURE: &str = include_str!("../../core/fixtures/dialect_fairness.json");

fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let owned = unsafe { CStr::from_ptr(s) }.to_str().unwrap().to_string();
    unsafe { stepwise_string_free(s) };
    owned
}

fn last_error() -> Option<String> {
    let p = stepwise_last_error();
    (!p.is_null()).then(|| unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string())
}

fn fixture_value() -> serde_json::Value {
    serde_json::from_str(FIXTURE).unwrap()
}

fn backend() -> *mut StepwiseBackend {
    let json = CString::new(fixture_value()["script"].to_string()).unwrap();
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stepwise_backend_from_script(json.as_ptr(), &mut out) }, StepwiseStatus::Ok);
    out
}

fn start(backend: *const StepwiseBackend) -> (*mut StepwiseSession, Vec<String>) {
    let fixture = fixture_value();
    let query = CString::new(fixture["query"].as_str().unwrap()).unwrap();
    let config = CString::new(fixture["config"].to_string()).unwrap();
    let id = CString::new("ffi-session").unwrap();
    let mut session = ptr::null_mut();
    let mut messages = ptr::null_mut();
    let status = unsafe {
        stepwise_session_start(backend, id.as_ptr(), query.as_ptr(), config.as_ptr(), &mut session, &mut messages)
    };
    assert_eq!(status, StepwiseStatus::Ok, "{:?}", last_error());
    (session, serde_json::from_str(&take(messages)).unwrap())
}

fn state(session: *const StepwiseSession) -> String {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stepwise_session_state(session, &mut out) }, StepwiseStatus::Ok);
    take(out)
}

#[test]
fn scripted_session_runs_to_completion() {
    let backend = backend();
    let (session, opening) = start(backend);
    assert!(!opening.is_empty());
    assert_eq!(state(session), "AwaitingReview");

    let fixture = fixture_value();
    for turn in fixture["turns"].as_array().unwrap() {
        let utterance = CString::new(turn["utterance"].as_str().unwrap()).unwrap();
        let mut messages = ptr::null_mut();
        let status = unsafe { stepwise_session_handle(backend, session, utterance.as_ptr(), &mut messages) };
        assert_eq!(status, StepwiseStatus::Ok, "{:?}", last_error());
        let messages: Vec<String> = serde_json::from_str(&take(messages)).unwrap();
        assert!(!messages.is_empty());
    }
    assert_eq!(state(session), "Done");

    let mut chain = ptr::null_mut();
    assert_eq!(unsafe { stepwise_session_chain(session, &mut chain) }, StepwiseStatus::Ok);
    assert!(take(chain).starts_with("[Step 1] "));

    let mut markdown = ptr::null_mut();
    assert_eq!(
        unsafe { stepwise_session_export(session, StepwiseFormat::Markdown, &mut markdown) },
        StepwiseStatus::Ok
    );
    assert!(take(markdown).contains("[Step 4]"));

    // the JSON export restores to an equivalent session
    let mut json = ptr::null_mut();
    assert_eq!(unsafe { stepwise_session_export(session, StepwiseFormat::Json, &mut json) }, StepwiseStatus::Ok);
    let json = CString::new(take(json)).unwrap();
    let mut restored = ptr::null_mut();
    assert_eq!(unsafe { stepwise_session_from_json(json.as_ptr(), &mut restored) }, StepwiseStatus::Ok);
    assert_eq!(state(restored), "Done");

    // a finished session refuses input and keeps its state
    let more = CString::new("Continue").unwrap();
    let mut messages = ptr::null_mut();
    let status = unsafe { stepwise_session_handle(backend, session, more.as_ptr(), &mut messages) };
    assert_eq!(status, StepwiseStatus::NotAccepting);
    assert!(messages.is_null());
    assert!(last_error().is_some());
    assert_eq!(state(session), "Done");
    assert!(last_error().is_none());

    unsafe {
        stepwise_session_free(restored);
        stepwise_session_free(session);
        stepwise_backend_free(backend);
    }
}

#[test]
fn bad_arguments_are_reported() {
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { stepwise_backend_from_script(ptr::null(), &mut out) }, StepwiseStatus::NullArgument);
    assert!(last_error().unwrap().contains("fixture_json"));

    let bad = CString::new("{\"nope\": 1}").unwrap();
    assert_eq!(unsafe { stepwise_backend_from_script(bad.as_ptr(), &mut out) }, StepwiseStatus::InvalidFixture);
    assert!(out.is_null());

    let invalid_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { stepwise_backend_from_script(invalid_utf8.as_ptr().cast(), &mut out) },
        StepwiseStatus::InvalidUtf8
    );

    let backend = backend();
    let id = CString::new("x").unwrap();
    let empty = CString::new("   ").unwrap();
    let mut session = ptr::null_mut();
    let status = unsafe {
        stepwise_session_start(backend, id.as_ptr(), empty.as_ptr(), ptr::null(), &mut session, ptr::null_mut())
    };
    assert_eq!(status, StepwiseStatus::InvalidArgument);
    assert!(session.is_null());

    let query = CString::new("why?").unwrap();
    let config = CString::new("{\"alpha\": 0.0}").unwrap();
    let status = unsafe {
        stepwise_session_start(backend, id.as_ptr(), query.as_ptr(), config.as_ptr(), &mut session, ptr::null_mut())
    };
    assert_eq!(status, StepwiseStatus::InvalidArgument);

    assert_eq!(unsafe { stepwise_session_state(ptr::null(), &mut out.cast()) }, StepwiseStatus::NullArgument);
    let garbage = CString::new("{}").unwrap();
    assert_eq!(
        unsafe { stepwise_session_from_json(garbage.as_ptr(), &mut session) },
        StepwiseStatus::InvalidArgument
    );

    unsafe {
        stepwise_backend_free(backend);
        stepwise_backend_free(ptr::null_mut());
        stepwise_session_free(ptr::null_mut());
        stepwise_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/stepwise.h")).unwrap();
    for name in [
        "stepwise_last_error",
        "stepwise_string_free",
        "stepwise_backend_from_script",
        "stepwise_backend_free",
        "stepwise_session_start",
        "stepwise_session_from_json",
        "stepwise_session_handle",
        "stepwise_session_state",
        "stepwise_session_chain",
        "stepwise_session_export",
        "stepwise_session_free",
        "typedef struct StepwiseSession StepwiseSession",
        "STEPWISE_STATUS_NOT_ACCEPTING = 6",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
