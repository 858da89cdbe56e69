//! Completion backends.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::{PromptBundle, PurposeKind};

mod http;
mod scripted;

pub use http::{HttpBackend, HttpConfig};
pub use scripted::{load_script, load_script_file, ScriptKey, ScriptedBackend};

pub type Params = BTreeMap<String, serde_json::Value>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("at least one candidate must be requested")]
    ZeroCandidates,
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),
    #[error("malformed backend reply: {0}")]
    BackendMalformedReply(String),
    #[error("no scripted reply for purpose {purpose:?}, stale {stale:?}, turn {turn}")]
    ScriptMiss {
        purpose: PurposeKind,
        stale: Vec<u32>,
        turn: u32,
    },
    #[error("invalid fixture: {0}")]
    FixtureSchema(String),
}

/// What a backend disclosed about itself for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMetadata {
    pub model_version: String,
    pub parameters: Params,
    /// In [0, 1] when present.
    pub confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelResponse {
    /// Never empty on success.
    pub candidates: Vec<String>,
    pub metadata: ModelMetadata,
}

/// A completion source. Implementations must be shareable across sessions.
pub trait Backend: Send + Sync {
    fn complete(&self, bundle: &PromptBundle, n: u32, params: &Params) -> Result<ModelResponse, ModelError>;
}

/// Request parameters echoed into metadata, plus `n`.
pub fn echo_params(n: u32, params: &Params) -> Params {
    let mut echoed = params.clone();
    echoed.insert("n".to_string(), serde_json::json!(n));
    echoed
}
