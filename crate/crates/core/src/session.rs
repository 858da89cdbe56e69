//! Session record: the query, the evolving chain, lifecycle state, and an
//! append-only transcript.

use serde::{Deserialize, Serialize};

use crate::adaptation::{EditRecord, PreferenceVector, DEFAULT_ALPHA, DEFAULT_THETA};
use crate::chain::ReasoningChain;
use crate::command::{EditCommand, EditScope};
use crate::lifecycle::{transition, IllegalTransition, SessionEvent, SessionState};
use crate::protocol::PurposeKind;
use crate::safeguards::{Disclosure, PiiFinding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    /// Candidates requested per completion.
    pub candidates: u32,
    /// Preference learning rate.
    pub alpha: f64,
    /// Magnitude a preference component needs before it becomes a prompt directive.
    pub theta: f64,
    pub default_scope: EditScope,
    pub temperature: f64,
    pub seed: Option<u64>,
    pub model: String,
    pub endpoint: Option<String>,
    /// Name of the environment variable holding the endpoint's bearer token.
    pub auth_env: Option<String>,
    pub timeout_secs: u64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            candidates: 3,
            alpha: DEFAULT_ALPHA,
            theta: DEFAULT_THETA,
            default_scope: EditScope::Cascade,
            temperature: 0.7,
            seed: None,
            model: "default".to_string(),
            endpoint: None,
            auth_env: None,
            timeout_secs: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiiSource {
    UserEdit,
    ModelOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum TranscriptEntry {
    Query {
        text: String,
    },
    StateChanged {
        from: SessionState,
        to: SessionState,
    },
    Utterance {
        text: String,
    },
    EditApplied {
        command: EditCommand,
        /// Ordinals (after the edit) that went stale.
        invalidated: Vec<u32>,
    },
    ModelCall {
        purpose: PurposeKind,
        stale: Vec<u32>,
        candidates: usize,
        chosen: String,
        /// Reply text outside any step marker.
        prose: String,
        disclosure: Disclosure,
    },
    PiiWarning {
        source: PiiSource,
        findings: Vec<PiiFinding>,
    },
    Message {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEvent {
    pub seq: u64,
    #[serde(flatten)]
    pub entry: TranscriptEntry,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalAnswer {
    pub text: String,
    pub chain_snapshot: ReasoningChain,
    pub disclosure: Disclosure,
}

/// Something the engine is waiting on the user to approve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Pending {
    /// Edits held back because their text looks like personal data.
    PiiOverride { commands: Vec<EditCommand> },
    /// A freeform utterance the user may forward to the model.
    Forward { raw: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    id: String,
    query: String,
    pub(crate) chain: ReasoningChain,
    state: SessionState,
    transcript: Vec<TranscriptEvent>,
    config: SessionConfig,
    pub(crate) edit_log: Vec<EditRecord>,
    pub(crate) preference: PreferenceVector,
    edit_count: u32,
    pub(crate) final_answer: Option<FinalAnswer>,
    pub(crate) pending: Option<Pending>,
}

impl Session {
    pub fn new(id: impl Into<String>, query: impl Into<String>, config: SessionConfig) -> Self {
        let preference = PreferenceVector::with_alpha(config.alpha);
        let mut session = Session {
            id: id.into(),
            query: query.into(),
            chain: ReasoningChain::default(),
            state: SessionState::Created,
            transcript: Vec::new(),
            config,
            edit_log: Vec::new(),
            preference,
            edit_count: 0,
            final_answer: None,
            pending: None,
        };
        let text = session.query.clone();
        session.push(TranscriptEntry::Query { text });
        session
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn query(&self) -> &str {
        &self.query
    }

    pub fn chain(&self) -> &ReasoningChain {
        &self.chain
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn transcript(&self) -> &[TranscriptEvent] {
        &self.transcript
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn edit_log(&self) -> &[EditRecord] {
        &self.edit_log
    }

    pub fn preference(&self) -> &PreferenceVector {
        &self.preference
    }

    /// Seeds the preference vector, e.g. from a persisted profile.
    pub fn set_preference(&mut self, preference: PreferenceVector) {
        self.preference = preference;
    }

    /// Structural edits applied so far.
    pub fn edit_count(&self) -> u32 {
        self.edit_count
    }

    pub fn final_answer(&self) -> Option<&FinalAnswer> {
        self.final_answer.as_ref()
    }

    pub fn pending(&self) -> Option<&Pending> {
        self.pending.as_ref()
    }

    pub fn disclosures(&self) -> impl Iterator<Item = &Disclosure> {
        self.transcript.iter().filter_map(|e| match &e.entry {
            TranscriptEntry::ModelCall { disclosure, .. } => Some(disclosure),
            _ => None,
        })
    }

    pub(crate) fn push(&mut self, entry: TranscriptEntry) {
        let seq = self.transcript.len() as u64;
        self.transcript.push(TranscriptEvent { seq, entry });
    }

    pub(crate) fn fire(&mut self, event: SessionEvent) -> Result<(), IllegalTransition> {
        let to = transition(self.state, event)?;
        let from = self.state;
        self.state = to;
        self.push(TranscriptEntry::StateChanged { from, to });
        Ok(())
    }

    pub(crate) fn bump_edit_count(&mut self) {
        self.edit_count += 1;
    }
}
