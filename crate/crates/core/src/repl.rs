//! Terminal loop. Prints the engine's messages and nothing else of its own
//! beyond input prompts.

use std::io::{BufRead, Write};

use anyhow::Result;

use crate::engine::Engine;
use crate::session::{Session, SessionConfig};
use crate::store::SessionStore;

pub struct ReplOptions {
    pub config: SessionConfig,
    pub store: Option<SessionStore>,
    /// Opt-in persistent preference profile.
    pub profile: Option<String>,
}

fn print_messages<W: Write>(out: &mut W, messages: &[String]) -> Result<()> {
    for m in messages {
        writeln!(out, "{m}\n")?;
    }
    out.flush()?;
    Ok(())
}

fn persist(options: &ReplOptions, session: &Session, logged_before: usize) -> Result<()> {
    if let Some(store) = &options.store {
        store.save(session)?;
        if let Some(profile) = &options.profile {
            store.save_profile(profile, session.preference(), &session.edit_log()[logged_before..])?;
        }
    }
    Ok(())
}

/// Reads the query from the first non-empty line, then one utterance per
/// line until EOF or `:quit`. Returns the last session state.
pub fn run_repl<R: BufRead, W: Write>(engine: &Engine<'_>, options: &ReplOptions, input: R, mut out: W) -> Result<Option<Session>> {
    let mut lines = input.lines();
    write!(out, "query> ")?;
    out.flush()?;
    let query = loop {
        match lines.next() {
            Some(line) => {
                let line = line?;
                if !line.trim().is_empty() {
                    break line;
                }
            }
            None => return Ok(None),
        }
    };

    let outcome = engine.start_session(&query, options.config.clone())?;
    let mut session = outcome.session;
    if let (Some(store), Some(profile)) = (&options.store, &options.profile) {
        if let Some(pref) = store.load_profile(profile)? {
            session.set_preference(pref);
        }
    }
    print_messages(&mut out, &outcome.messages)?;
    persist(options, &session, 0)?;

    loop {
        write!(out, "> ")?;
        out.flush()?;
        let Some(line) = lines.next() else { break };
        let line = line?;
        let text = line.trim();
        if text.is_empty() {
            continue;
        }
        if text == ":quit" {
            break;
        }
        let logged = session.edit_log().len();
        match engine.handle_utterance(&session, text) {
            Ok(outcome) => {
                print_messages(&mut out, &outcome.messages)?;
                session = outcome.session;
                persist(options, &session, logged)?;
            }
            Err(e) => {
                writeln!(out, "error: {e}\n")?;
            }
        }
    }
    Ok(Some(session))
}
