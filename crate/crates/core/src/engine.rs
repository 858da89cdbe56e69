//! The edit-regenerate loop.
//!
//! Every operation works on a copy of the session and hands the copy back
//! only on success, so a failed or canceled model call leaves the caller's
//! session exactly as it was.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use chrono::Utc;
use thiserror::Error;

use crate::adaptation::{record_edit, rerank_indices, synthesize_directives, EditRecord};
use crate::chain::{ChainError, ResolvedEdit};
use crate::command::{CommandKind, EditCommand, EditScope, ExportFormat};
use crate::lifecycle::{IllegalTransition, SessionEvent, SessionState};
use crate::model::{Backend, ModelError, ModelResponse, Params};
use crate::protocol::{
    parse_command_with_scope, parse_steps, render_chain, render_prompt, step_list, ProtocolError, Purpose,
    REVIEW_QUESTION,
};
use crate::safeguards::{build_disclosure, detect_pii, privacy_reminder, Disclosure};
use crate::session::{FinalAnswer, Pending, PiiSource, Session, SessionConfig, TranscriptEntry};
use crate::store::SessionEnvelope;

pub const EXPORT_OFFER: &str =
    "Would you like to export the reasoning chain and final answer? Reply \"export as markdown\" or \"export as json\".";
pub const FREEFORM_REPLY: &str = "I did not recognize that as an edit. Please restate it (for example, \
\"Replace Step 2 with: ...\"), or reply \"forward\" to send your message to the model as is.";
pub const CONFIRM_ALONE: &str =
    "Please confirm on its own once you are done editing, so it is clear the chain is final.";
pub const EMPTY_CONFIRM: &str =
    "There are no steps to confirm. Add one first, for example \"insert at start: ...\".";
pub const PII_HOLD: &str =
    "I have not applied this edit yet. Reply \"override\" to apply it anyway, or send a different edit.";

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    IllegalTransition(#[from] IllegalTransition),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("session is {0:?} and does not accept this input")]
    NotAcceptingInput(SessionState),
    #[error("no stale steps to regenerate")]
    NothingStale,
    #[error("regenerated reply did not match the stale steps {expected:?}")]
    RegeneratedWrongSteps { expected: Vec<u32> },
    #[error("stale steps remain; regenerate before finalizing")]
    StaleStepsRemain,
    #[error("cannot finalize an empty chain")]
    EmptyChain,
    #[error("operation canceled")]
    Canceled,
}

#[derive(Debug, Clone)]
pub struct EngineOutcome {
    pub session: Session,
    /// User-facing texts, in display order.
    pub messages: Vec<String>,
    /// True iff the session is Done or Failed.
    pub finished: bool,
}

/// A session copy plus the messages produced while working on it.
struct Turn {
    session: Session,
    messages: Vec<String>,
}

impl Turn {
    fn new(session: Session) -> Self {
        Turn {
            session,
            messages: Vec::new(),
        }
    }

    fn say(&mut self, text: impl Into<String>) {
        let text = text.into();
        self.session.push(TranscriptEntry::Message { text: text.clone() });
        self.messages.push(text);
    }

    fn finish(self) -> EngineOutcome {
        let finished = self.session.state().is_terminal();
        EngineOutcome {
            session: self.session,
            messages: self.messages,
            finished,
        }
    }
}

/// Runs sessions against one backend.
#[derive(Clone)]
pub struct Engine<'a> {
    backend: &'a dyn Backend,
    cancel: Option<Arc<AtomicBool>>,
}

impl<'a> Engine<'a> {
    pub fn new(backend: &'a dyn Backend) -> Self {
        Engine { backend, cancel: None }
    }

    /// Any operation that observes `flag` set after a model call returns
    /// `Canceled` and discards its work.
    pub fn with_cancel(mut self, flag: Arc<AtomicBool>) -> Self {
        self.cancel = Some(flag);
        self
    }

    fn check_cancel(&self) -> Result<(), EngineError> {
        match &self.cancel {
            Some(flag) if flag.load(Ordering::SeqCst) => Err(EngineError::Canceled),
            _ => Ok(()),
        }
    }

    /// One model call: prompt, completion, disclosure, PII scan.
    /// Returns the candidates in preference order.
    fn call(&self, turn: &mut Turn, purpose: &Purpose, rerank: bool) -> Result<(Vec<String>, Disclosure), EngineError> {
        let session = &turn.session;
        let directives = synthesize_directives(session.preference(), session.config().theta);
        let bundle = render_prompt(session, purpose, &directives)?;
        let config = session.config();
        let mut params = Params::new();
        params.insert("temperature".into(), serde_json::json!(config.temperature));
        if let Some(seed) = config.seed {
            params.insert("seed".into(), serde_json::json!(seed));
        }
        let ModelResponse { candidates, metadata } = self.backend.complete(&bundle, config.candidates, &params)?;
        self.check_cancel()?;
        if candidates.is_empty() {
            return Err(ModelError::BackendMalformedReply("no candidates".into()).into());
        }

        let ordered: Vec<String> = if rerank {
            rerank_indices(&candidates, session.preference())
                .into_iter()
                .map(|i| candidates[i].clone())
                .collect()
        } else {
            candidates
        };
        let disclosure = build_disclosure(&metadata);
        let chosen = ordered[0].clone();
        let prose = parse_steps(&chosen).map(|p| p.prose).unwrap_or_default();
        turn.session.push(TranscriptEntry::ModelCall {
            purpose: purpose.kind(),
            stale: bundle.stale.clone(),
            candidates: ordered.len(),
            chosen: chosen.clone(),
            prose,
            disclosure: disclosure.clone(),
        });
        turn.say(disclosure.rendered.clone());
        self.warn_pii(turn, &chosen, PiiSource::ModelOutput);
        Ok((ordered, disclosure))
    }

    fn warn_pii(&self, turn: &mut Turn, text: &str, source: PiiSource) -> bool {
        let findings = detect_pii(text);
        if findings.is_empty() {
            return false;
        }
        let reminder = privacy_reminder(&findings, source == PiiSource::UserEdit);
        turn.session.push(TranscriptEntry::PiiWarning { source, findings });
        turn.say(reminder);
        true
    }

    fn show_chain(turn: &mut Turn) {
        let rendered = render_chain(turn.session.chain());
        turn.say(rendered);
        turn.say(REVIEW_QUESTION);
    }

    pub fn start_session(&self, query: &str, config: SessionConfig) -> Result<EngineOutcome, EngineError> {
        self.start_session_with_id(&uuid::Uuid::new_v4().to_string(), query, config)
    }

    pub fn start_session_with_id(
        &self,
        id: &str,
        query: &str,
        config: SessionConfig,
    ) -> Result<EngineOutcome, EngineError> {
        if query.trim().is_empty() {
            return Err(EngineError::EmptyQuery);
        }
        validate(&config)?;
        let mut turn = Turn::new(Session::new(id, query, config));
        turn.session.fire(SessionEvent::Start)?;

        let mut last_error = None;
        for _ in 0..2 {
            let (candidates, _) = self.call(&mut turn, &Purpose::InitialDraft, false)?;
            match crate::protocol::parse_chain(&candidates[0]) {
                Ok(chain) => {
                    turn.session.chain = chain;
                    turn.session.fire(SessionEvent::DraftReady)?;
                    Self::show_chain(&mut turn);
                    return Ok(turn.finish());
                }
                Err(e) => last_error = Some(e),
            }
        }
        let e = last_error.expect("loop ran");
        turn.session.fire(SessionEvent::FatalError)?;
        turn.say(format!("I could not produce a reasoning chain: {e}."));
        Ok(turn.finish())
    }

    pub fn handle_utterance(&self, session: &Session, utterance: &str) -> Result<EngineOutcome, EngineError> {
        let commands = parse_command_with_scope(utterance, session.config().default_scope);
        let state = session.state();
        let export_only = commands
            .iter()
            .all(|c| matches!(c.kind, CommandKind::Export { .. }));
        if state != SessionState::AwaitingReview && !(state.is_terminal() && export_only) {
            return Err(EngineError::NotAcceptingInput(state));
        }

        let mut turn = Turn::new(session.clone());
        turn.session.push(TranscriptEntry::Utterance {
            text: utterance.to_string(),
        });

        if state.is_terminal() {
            for c in &commands {
                if let CommandKind::Export { format } = c.kind {
                    let doc = export_session(&turn.session, format);
                    turn.say(doc);
                }
            }
            return Ok(turn.finish());
        }

        let reply = utterance.trim().trim_end_matches(['.', '!']).to_ascii_lowercase();
        match turn.session.pending.take() {
            Some(Pending::PiiOverride { commands: held }) if reply == "override" => {
                self.run_commands(&mut turn, held, true)?;
                return Ok(turn.finish());
            }
            Some(Pending::Forward { raw }) if reply == "forward" => {
                let (candidates, _) = self.call(&mut turn, &Purpose::Forward(raw), false)?;
                turn.say(candidates[0].trim().to_string());
                turn.say(REVIEW_QUESTION);
                return Ok(turn.finish());
            }
            _ => {}
        }

        self.run_commands(&mut turn, commands, false)?;
        Ok(turn.finish())
    }

    fn run_commands(&self, turn: &mut Turn, commands: Vec<EditCommand>, pii_approved: bool) -> Result<(), EngineError> {
        if let [EditCommand {
            kind: CommandKind::Freeform { raw },
            ..
        }] = commands.as_slice()
        {
            turn.session.pending = Some(Pending::Forward { raw: raw.clone() });
            turn.say(FREEFORM_REPLY);
            turn.say(REVIEW_QUESTION);
            return Ok(());
        }
        let confirms = commands.iter().filter(|c| c.kind == CommandKind::Confirm).count();
        if confirms > 0 {
            if commands.len() > 1 {
                turn.say(CONFIRM_ALONE);
                turn.say(REVIEW_QUESTION);
            } else {
                self.confirm(turn)?;
            }
            return Ok(());
        }

        let structural: Vec<&EditCommand> = commands.iter().filter(|c| c.is_structural()).collect();

        // Resolve every target against the chain the user was looking at.
        let mut resolved = Vec::with_capacity(structural.len());
        for command in &structural {
            match turn.session.chain.resolve(command) {
                Ok(edit) => resolved.push((*command, edit)),
                Err(e) => {
                    turn.say(user_error(&e));
                    turn.say(REVIEW_QUESTION);
                    return Ok(());
                }
            }
        }

        if !pii_approved {
            let mut flagged = false;
            for command in &structural {
                if let CommandKind::Replace { text, .. } | CommandKind::Insert { text, .. } = &command.kind {
                    flagged |= self.warn_pii(turn, text, PiiSource::UserEdit);
                }
            }
            if flagged {
                turn.session.pending = Some(Pending::PiiOverride { commands });
                turn.say(PII_HOLD);
                turn.say(REVIEW_QUESTION);
                return Ok(());
            }
        }

        if !resolved.is_empty() {
            // dry run first so a failing edit leaves the chain untouched
            let mut scratch = turn.session.chain.clone();
            let mut effects = Vec::with_capacity(resolved.len());
            for (command, edit) in &resolved {
                let original = match edit {
                    ResolvedEdit::Replace { id, .. } => scratch.step(*id).map(|s| s.text.clone()),
                    _ => None,
                };
                match scratch.apply_resolved(edit, command.scope) {
                    Ok(effect) => {
                        scratch = effect.chain.clone();
                        effects.push((*command, edit, original, effect));
                    }
                    Err(e) => {
                        turn.say(user_error(&e));
                        turn.say(REVIEW_QUESTION);
                        return Ok(());
                    }
                }
            }

            let mut acks = Vec::new();
            for (command, edit, original, effect) in effects {
                turn.session.chain = effect.chain;
                turn.session.bump_edit_count();
                let invalidated: Vec<u32> = turn
                    .session
                    .chain
                    .steps()
                    .iter()
                    .filter(|s| effect.invalidated.contains(&s.id))
                    .map(|s| s.ordinal)
                    .collect();
                turn.session.push(TranscriptEntry::EditApplied {
                    command: command.clone(),
                    invalidated,
                });
                if let (ResolvedEdit::Replace { id, .. }, Some(original)) = (edit, original) {
                    let revision = turn.session.chain.step(*id).map(|s| s.text.clone()).unwrap_or_default();
                    if revision != original {
                        let record = EditRecord {
                            session_id: turn.session.id().to_string(),
                            step_id: *id,
                            original,
                            revision,
                            timestamp: Utc::now(),
                        };
                        let pref = turn.session.preference.clone();
                        turn.session.preference = record_edit(&mut turn.session.edit_log, &pref, record)
                            .expect("texts differ");
                    }
                }
                acks.push(acknowledgement(command));
            }
            for ack in acks {
                turn.say(ack);
            }

            if turn.session.chain.has_stale() {
                turn.session.fire(SessionEvent::EditApplied)?;
                let stale: Vec<u32> = turn.session.chain.stale_steps().map(|s| s.ordinal).collect();
                turn.say(format!("Recalculating {}...", step_list(&stale)));
                match self.regenerate(turn) {
                    Ok(()) => {}
                    Err(EngineError::RegeneratedWrongSteps { expected }) => {
                        turn.session.fire(SessionEvent::FatalError)?;
                        turn.say(format!(
                            "Regeneration failed: the model did not return exactly {}.",
                            step_list(&expected)
                        ));
                        return Ok(());
                    }
                    Err(e) => return Err(e),
                }
            }
            turn.say(render_chain(turn.session.chain()));
        }

        for command in &commands {
            match command.kind {
                CommandKind::BiasCheck { target } => {
                    if turn.session.chain.by_ordinal(target).is_none() {
                        turn.say(user_error(&ChainError::UnknownStep(target)));
                        continue;
                    }
                    let (candidates, _) = self.call(turn, &Purpose::BiasAudit(target), false)?;
                    turn.say(candidates[0].trim().to_string());
                }
                CommandKind::Export { format } => {
                    let doc = export_session(&turn.session, format);
                    turn.say(doc);
                }
                _ => {}
            }
        }
        turn.say(REVIEW_QUESTION);
        Ok(())
    }

    /// Regenerates every stale block, one model call per block.
    fn regenerate(&self, turn: &mut Turn) -> Result<(), EngineError> {
        if turn.session.state() != SessionState::Regenerating {
            return Err(EngineError::NotAcceptingInput(turn.session.state()));
        }
        let blocks = turn.session.chain.stale_blocks();
        if blocks.is_empty() {
            return Err(EngineError::NothingStale);
        }
        for block in blocks {
            let purpose = Purpose::RegenerateStale(block.clone());
            let mut accepted = None;
            for _ in 0..2 {
                let (candidates, _) = self.call(turn, &purpose, true)?;
                if let Ok(parsed) = parse_steps(&candidates[0]) {
                    let ordinals: Vec<u32> = parsed.steps.iter().map(|(o, _)| *o).collect();
                    if ordinals == block {
                        accepted = Some(parsed.steps);
                        break;
                    }
                }
            }
            let steps = accepted.ok_or(EngineError::RegeneratedWrongSteps { expected: block })?;
            for (ordinal, text) in steps {
                turn.session
                    .chain
                    .set_regenerated(ordinal, &text)
                    .map_err(ProtocolError::from)?;
            }
        }
        turn.session.fire(SessionEvent::RegenDone)?;
        Ok(())
    }

    /// Regenerates all stale steps of a session in `Regenerating`.
    pub fn regenerate_stale(&self, session: &Session) -> Result<Session, EngineError> {
        let mut turn = Turn::new(session.clone());
        self.regenerate(&mut turn)?;
        Ok(turn.session)
    }

    fn confirm(&self, turn: &mut Turn) -> Result<(), EngineError> {
        if turn.session.chain.is_empty() {
            turn.say(EMPTY_CONFIRM);
            turn.say(REVIEW_QUESTION);
            return Ok(());
        }
        turn.session.fire(SessionEvent::Confirm)?;
        let answer = self.produce_final(turn)?;
        turn.say(answer.text.clone());
        turn.session.final_answer = Some(answer);
        turn.session.fire(SessionEvent::AnswerReady)?;
        turn.say(EXPORT_OFFER);
        Ok(())
    }

    fn produce_final(&self, turn: &mut Turn) -> Result<FinalAnswer, EngineError> {
        let session = &turn.session;
        if session.state() != SessionState::Finalizing {
            return Err(EngineError::NotAcceptingInput(session.state()));
        }
        if session.chain().is_empty() {
            return Err(EngineError::EmptyChain);
        }
        if session.chain().has_stale() {
            return Err(EngineError::StaleStepsRemain);
        }
        let snapshot = session.chain().clone();
        let (candidates, disclosure) = self.call(turn, &Purpose::FinalAnswer, false)?;
        Ok(FinalAnswer {
            text: candidates[0].trim().to_string(),
            chain_snapshot: snapshot,
            disclosure,
        })
    }

    /// Produces the final answer for a session in `Finalizing` and moves it to `Done`.
    pub fn finalize(&self, session: &Session) -> Result<(Session, FinalAnswer), EngineError> {
        let mut turn = Turn::new(session.clone());
        let answer = self.produce_final(&mut turn)?;
        turn.session.final_answer = Some(answer.clone());
        turn.session.fire(SessionEvent::AnswerReady)?;
        Ok((turn.session, answer))
    }
}

fn validate(config: &SessionConfig) -> Result<(), EngineError> {
    let bad = |m: &str| Err(EngineError::InvalidConfig(m.to_string()));
    if !(config.alpha > 0.0 && config.alpha <= 1.0) {
        return bad("alpha must lie in (0, 1]");
    }
    if config.candidates == 0 {
        return bad("candidates must be at least 1");
    }
    if config.theta.is_nan() || config.theta < 0.0 {
        return bad("theta must be non-negative");
    }
    Ok(())
}

fn acknowledgement(command: &EditCommand) -> String {
    let scope = match command.scope {
        EditScope::Cascade => "",
        EditScope::Local => " (local edit; later steps are kept as they are)",
    };
    let what = match &command.kind {
        CommandKind::Replace { target, .. } => format!("Updated Step {target}"),
        CommandKind::Delete { target } => format!("Removed Step {target}"),
        CommandKind::Merge { first, second } => format!("Merged Steps {first} and {second}"),
        CommandKind::Insert { after: Some(n), .. } => format!("New step after Step {n}"),
        CommandKind::Insert { after: None, .. } => "New first step".to_string(),
        _ => unreachable!("only structural commands are acknowledged"),
    };
    format!("{what} acknowledged{scope}.")
}

fn user_error(e: &ChainError) -> String {
    match e {
        ChainError::UnknownStep(n) => format!("There is no Step {n} in the current chain."),
        ChainError::MergeNonAdjacent(a, b) => {
            format!("Steps {a} and {b} are not next to each other, so they cannot be merged.")
        }
        ChainError::EmptyReplacementText => "The new step text is empty.".to_string(),
        other => format!("That edit could not be applied: {other}."),
    }
}

/// Renders a session as a Markdown report or as its persisted JSON envelope.
pub fn export_session(session: &Session, format: ExportFormat) -> String {
    match format {
        ExportFormat::Json => {
            serde_json::to_string_pretty(&SessionEnvelope::new(session.clone())).expect("sessions serialize")
        }
        ExportFormat::Markdown => export_markdown(session),
    }
}

fn export_markdown(session: &Session) -> String {
    let mut out = String::from("# Reasoning session\n\n## Query\n\n");
    out.push_str(session.query());
    out.push_str(&format!("\n\n## State\n\n{:?}\n\n## Reasoning chain\n\n", session.state()));
    if session.chain().is_empty() {
        out.push_str("(no steps)");
    } else {
        out.push_str(&render_chain(session.chain()));
    }

    out.push_str("\n\n## Edit history\n\n");
    let edits: Vec<String> = session
        .transcript()
        .iter()
        .filter_map(|e| match &e.entry {
            TranscriptEntry::EditApplied { command, .. } => Some(command),
            _ => None,
        })
        .enumerate()
        .map(|(i, c)| {
            let scope = match c.scope {
                EditScope::Cascade => "cascade",
                EditScope::Local => "local",
            };
            let mut line = format!("{}. {} ({scope})", i + 1, c.describe());
            if let CommandKind::Replace { text, .. } | CommandKind::Insert { text, .. } = &c.kind {
                line.push_str(": ");
                line.push_str(text);
            }
            line
        })
        .collect();
    if edits.is_empty() {
        out.push_str("No edits.");
    } else {
        out.push_str(&edits.join("\n"));
    }

    out.push_str("\n\n## Model disclosures\n");
    for event in session.transcript() {
        if let TranscriptEntry::ModelCall { purpose, disclosure, .. } = &event.entry {
            out.push_str(&format!("\n{purpose:?}:\n\n```text\n{}\n```\n", disclosure.rendered));
        }
    }

    if let (SessionState::Done, Some(answer)) = (session.state(), session.final_answer()) {
        out.push_str("\n## Final answer\n\n");
        out.push_str(&answer.text);
        out.push('\n');
    }
    out
}

/// Starts a session. See [`Engine::start_session`].
pub fn start_session(query: &str, config: SessionConfig, backend: &dyn Backend) -> Result<EngineOutcome, EngineError> {
    Engine::new(backend).start_session(query, config)
}

/// Handles one user utterance. See [`Engine::handle_utterance`].
pub fn handle_utterance(session: &Session, utterance: &str, backend: &dyn Backend) -> Result<EngineOutcome, EngineError> {
    Engine::new(backend).handle_utterance(session, utterance)
}

pub fn regenerate_stale(session: &Session, backend: &dyn Backend) -> Result<Session, EngineError> {
    Engine::new(backend).regenerate_stale(session)
}

pub fn finalize(session: &Session, backend: &dyn Backend) -> Result<(Session, FinalAnswer), EngineError> {
    Engine::new(backend).finalize(session)
}

/// Ids of steps whose text differs between two chains, plus steps that
/// exist in only one of them.
pub fn changed_steps(before: &crate::chain::ReasoningChain, after: &crate::chain::ReasoningChain) -> BTreeSet<crate::chain::StepId> {
    let mut changed = BTreeSet::new();
    for step in after.steps() {
        match before.step(step.id) {
            Some(old) if old.text == step.text => {}
            _ => {
                changed.insert(step.id);
            }
        }
    }
    for step in before.steps() {
        if after.step(step.id).is_none() {
            changed.insert(step.id);
        }
    }
    changed
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::ReasoningChain;
    use crate::model::ScriptedBackend;

    fn backend() -> ScriptedBackend {
        ScriptedBackend::from_value(serde_json::json!({"version": 1, "entries": [
            {"key": {"purpose": "FinalAnswer"}, "candidates": ["done"]},
        ]}))
        .unwrap()
    }

    fn session_in(chain: ReasoningChain, events: &[SessionEvent]) -> Session {
        let mut session = Session::new("t", "q", SessionConfig::default());
        session.chain = chain;
        for e in events {
            session.fire(*e).unwrap();
        }
        session
    }

    const TO_FINALIZING: [SessionEvent; 3] = [SessionEvent::Start, SessionEvent::DraftReady, SessionEvent::Confirm];

    #[test]
    fn finalize_requires_a_fresh_non_empty_chain() {
        let backend = backend();
        let engine = Engine::new(&backend);

        let chain = ReasoningChain::new(&[(1, "a"), (2, "b")]).unwrap();
        let stale = chain
            .apply_edit(&EditCommand::new(CommandKind::Replace { target: 1, text: "z".into() }))
            .unwrap()
            .chain;
        let err = engine.finalize(&session_in(stale, &TO_FINALIZING)).unwrap_err();
        assert!(matches!(err, EngineError::StaleStepsRemain));

        let err = engine.finalize(&session_in(ReasoningChain::default(), &TO_FINALIZING)).unwrap_err();
        assert!(matches!(err, EngineError::EmptyChain));

        let (session, answer) = engine.finalize(&session_in(chain.clone(), &TO_FINALIZING)).unwrap();
        assert_eq!(session.state(), SessionState::Done);
        assert_eq!(answer.text, "done");
        assert_eq!(answer.chain_snapshot, chain);
    }

    #[test]
    fn regenerate_needs_stale_steps() {
        let backend = backend();
        let engine = Engine::new(&backend);
        let chain = ReasoningChain::new(&[(1, "a")]).unwrap();
        let session = session_in(
            chain,
            &[SessionEvent::Start, SessionEvent::DraftReady, SessionEvent::EditApplied],
        );
        assert!(matches!(engine.regenerate_stale(&session), Err(EngineError::NothingStale)));
    }

    #[test]
    fn empty_chain_confirm_is_explained() {
        let backend = backend();
        let engine = Engine::new(&backend);
        let session = session_in(
            ReasoningChain::default(),
            &[SessionEvent::Start, SessionEvent::DraftReady],
        );
        let out = engine.handle_utterance(&session, "continue").unwrap();
        assert_eq!(out.messages, vec![EMPTY_CONFIRM, REVIEW_QUESTION]);
        assert_eq!(out.session.state(), SessionState::AwaitingReview);
    }
}
