mod common;

use std::io::Cursor;

use stepwise::protocol::REVIEW_QUESTION;
use stepwise::repl::{run_repl, ReplOptions};
use stepwise::store::SessionStore;
use stepwise::{Engine, SessionConfig, SessionState};

use common::SyntheticBackend;

#[test]
fn repl_session_is_printed_saved_and_profiled() {
    let backend = SyntheticBackend::new("[Step 1] a\n\n[Step 2] b");
    let dir = tempfile::tempdir().unwrap();
    let options = ReplOptions {
        config: SessionConfig::default(),
        store: Some(SessionStore::new(dir.path())),
        profile: Some("ana".into()),
    };
    let input = "\nWhy?\nReplace Step 1 with: However, a counterexample.\n\ncontinue\n:quit\nignored\n";
    let mut out = Vec::new();
    let session = run_repl(&Engine::new(&backend), &options, Cursor::new(input), &mut out)
        .unwrap()
        .unwrap();
    let text = String::from_utf8(out).unwrap();
    assert!(text.starts_with("query> Model disclosure:"));
    assert!(text.contains(&format!("[Step 1] a\n\n[Step 2] b\n\n{REVIEW_QUESTION}")));
    assert!(text.contains("Updated Step 1 acknowledged."));
    assert_eq!(session.state(), SessionState::Done);

    let store = SessionStore::new(dir.path());
    assert_eq!(store.load(session.id()).unwrap(), session);
    let profile = store.load_profile("ana").unwrap().unwrap();
    assert_eq!(profile.update_count, 1);
    assert_eq!(store.load_profile_log("ana").unwrap().len(), 1);

    // a later session starts from the saved profile
    let mut out = Vec::new();
    let next = run_repl(&Engine::new(&backend), &options, Cursor::new("Again?\n"), &mut out)
        .unwrap()
        .unwrap();
    assert_eq!(next.preference(), &profile);
}

#[test]
fn repl_without_a_query_ends_quietly() {
    let backend = SyntheticBackend::new("[Step 1] a");
    let options = ReplOptions {
        config: SessionConfig::default(),
        store: None,
        profile: None,
    };
    let mut out = Vec::new();
    assert!(run_repl(&Engine::new(&backend), &options, Cursor::new("\n\n"), &mut out)
        .unwrap()
        .is_none());
}
