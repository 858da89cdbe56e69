//! Session lifecycle state machine.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Created,
    Drafting,
    AwaitingReview,
    Regenerating,
    Finalizing,
    Done,
    Failed,
}

impl SessionState {
    pub const ALL: [SessionState; 7] = [
        SessionState::Created,
        SessionState::Drafting,
        SessionState::AwaitingReview,
        SessionState::Regenerating,
        SessionState::Finalizing,
        SessionState::Done,
        SessionState::Failed,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, SessionState::Done | SessionState::Failed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionEvent {
    Start,
    DraftReady,
    EditApplied,
    RegenDone,
    Confirm,
    AnswerReady,
    FatalError,
}

impl SessionEvent {
    pub const ALL: [SessionEvent; 7] = [
        SessionEvent::Start,
        SessionEvent::DraftReady,
        SessionEvent::EditApplied,
        SessionEvent::RegenDone,
        SessionEvent::Confirm,
        SessionEvent::AnswerReady,
        SessionEvent::FatalError,
    ];
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("illegal transition: {event:?} in state {state:?}")]
pub struct IllegalTransition {
    pub state: SessionState,
    pub event: SessionEvent,
}

/// The only legal moves. Finalizing is entered exclusively from
/// AwaitingReview on Confirm, and Done exclusively from Finalizing.
pub fn transition(state: SessionState, event: SessionEvent) -> Result<SessionState, IllegalTransition> {
    use SessionEvent as E;
    use SessionState as S;
    match (state, event) {
        (_, E::FatalError) => Ok(S::Failed),
        (S::Created, E::Start) => Ok(S::Drafting),
        (S::Drafting, E::DraftReady) => Ok(S::AwaitingReview),
        (S::AwaitingReview, E::EditApplied) => Ok(S::Regenerating),
        (S::Regenerating, E::RegenDone) => Ok(S::AwaitingReview),
        (S::AwaitingReview, E::Confirm) => Ok(S::Finalizing),
        (S::Finalizing, E::AnswerReady) => Ok(S::Done),
        _ => Err(IllegalTransition { state, event }),
    }
}
