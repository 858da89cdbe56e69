//! An interactive chain-of-thought session engine.
//!
//! A model drafts a numbered reasoning chain; the user edits steps by
//! number; only the steps that depend on an edit are regenerated; and the
//! final answer is produced only after the user explicitly confirms the
//! chain. Revisions feed a small preference model that reranks later
//! completions and adds style notes to prompts. Every model call is
//! disclosed, and user edits and model output are scanned for personal data.

pub mod adaptation;
pub mod chain;
pub mod command;
pub mod engine;
pub mod lifecycle;
pub mod model;
pub mod protocol;
pub mod repl;
pub mod safeguards;
pub mod scenario;
pub mod server;
pub mod session;
pub mod store;

pub use chain::{ReasoningChain, ReasoningStep, StepId, StepStatus};
pub use command::{CommandKind, EditCommand, EditScope, ExportFormat};
pub use engine::{Engine, EngineError, EngineOutcome};
pub use lifecycle::{SessionEvent, SessionState};
pub use model::{Backend, ScriptedBackend};
pub use session::{Session, SessionConfig};
