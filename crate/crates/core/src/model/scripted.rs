use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{echo_params, Backend, ModelError, ModelMetadata, ModelResponse, Params};
use crate::protocol::{PromptBundle, PurposeKind};

const DEFAULT_MODEL: &str = "scripted";

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScriptKey {
    pub purpose: PurposeKind,
    #[serde(default)]
    pub stale: Vec<u32>,
    #[serde(default)]
    pub turn: u32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FixtureEntry {
    key: ScriptKey,
    candidates: Vec<String>,
    #[serde(default)]
    confidence: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Fixture {
    version: u32,
    #[serde(default)]
    model: Option<String>,
    entries: Vec<FixtureEntry>,
}

#[derive(Debug, Clone)]
struct ScriptedReply {
    candidates: Vec<String>,
    confidence: Option<f64>,
}

/// Replays fixture-defined completions keyed by (purpose, stale ordinals, turn).
#[derive(Debug, Clone)]
pub struct ScriptedBackend {
    model: String,
    replies: HashMap<ScriptKey, ScriptedReply>,
}

impl ScriptedBackend {
    pub fn from_value(value: serde_json::Value) -> Result<Self, ModelError> {
        let fixture: Fixture =
            serde_json::from_value(value).map_err(|e| ModelError::FixtureSchema(e.to_string()))?;
        if fixture.version != 1 {
            return Err(ModelError::FixtureSchema(format!(
                "unsupported version {}",
                fixture.version
            )));
        }
        let model = fixture.model.unwrap_or_else(|| DEFAULT_MODEL.to_string());
        if model.trim().is_empty() {
            return Err(ModelError::FixtureSchema("model name is empty".into()));
        }
        let mut replies = HashMap::new();
        for (i, entry) in fixture.entries.into_iter().enumerate() {
            if entry.candidates.is_empty() {
                return Err(ModelError::FixtureSchema(format!("entry {i} has no candidates")));
            }
            if let Some(c) = entry.confidence {
                if !(0.0..=1.0).contains(&c) {
                    return Err(ModelError::FixtureSchema(format!(
                        "entry {i} confidence {c} outside [0, 1]"
                    )));
                }
            }
            let key = entry.key;
            if replies.contains_key(&key) {
                return Err(ModelError::FixtureSchema(format!("entry {i} duplicates key {key:?}")));
            }
            replies.insert(
                key,
                ScriptedReply {
                    candidates: entry.candidates,
                    confidence: entry.confidence,
                },
            );
        }
        Ok(ScriptedBackend { model, replies })
    }

    pub fn len(&self) -> usize {
        self.replies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.replies.is_empty()
    }
}

/// Parses and validates a fixture document.
pub fn load_script(source: &str) -> Result<ScriptedBackend, ModelError> {
    let value: serde_json::Value =
        serde_json::from_str(source).map_err(|e| ModelError::FixtureSchema(e.to_string()))?;
    ScriptedBackend::from_value(value)
}

pub fn load_script_file(path: &Path) -> Result<ScriptedBackend, ModelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::FixtureSchema(format!("{}: {e}", path.display())))?;
    load_script(&text)
}

impl Backend for ScriptedBackend {
    fn complete(&self, bundle: &PromptBundle, n: u32, params: &Params) -> Result<ModelResponse, ModelError> {
        if n == 0 {
            return Err(ModelError::ZeroCandidates);
        }
        let key = ScriptKey {
            purpose: bundle.purpose,
            stale: bundle.stale.clone(),
            turn: bundle.turn,
        };
        let reply = self.replies.get(&key).ok_or(ModelError::ScriptMiss {
            purpose: key.purpose,
            stale: key.stale.clone(),
            turn: key.turn,
        })?;
        let candidates: Vec<String> = reply.candidates.iter().take(n as usize).cloned().collect();
        let mut parameters = echo_params(n, params);
        let shortfall = n as usize - candidates.len();
        if shortfall > 0 {
            parameters.insert("shortfall".to_string(), serde_json::json!(shortfall));
        }
        Ok(ModelResponse {
            candidates,
            metadata: ModelMetadata {
                model_version: self.model.clone(),
                parameters,
                confidence: reply.confidence,
            },
        })
    }
}
