//! Scripted end-to-end dialogue replay.
//!
//! A scenario file bundles a query, a model fixture, and the user turns,
//! each with the exact messages the engine must produce:
//!
//! ```json
//! {"version": 1, "session_id": "demo", "query": "...", "config": {...},
//!  "script": {"version": 1, "entries": [...]},
//!  "opening": ["..."],
//!  "turns": [{"utterance": "...", "expect": ["..."]}],
//!  "final_state": "Done"}
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{Engine, EngineError};
use crate::lifecycle::SessionState;
use crate::model::{ModelError, ScriptedBackend};
use crate::session::{Session, SessionConfig};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario fixture: {0}")]
    FixtureSchema(String),
    #[error("transcript mismatch at {location}, message {index}:\n  expected: {expected:?}\n  actual:   {actual:?}")]
    TranscriptMismatch {
        location: String,
        index: usize,
        expected: Option<String>,
        actual: Option<String>,
    },
    #[error("expected final state {expected:?}, got {actual:?}")]
    FinalState {
        expected: SessionState,
        actual: SessionState,
    },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

impl From<ModelError> for ScenarioError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::FixtureSchema(m) => ScenarioError::FixtureSchema(format!("script: {m}")),
            other => ScenarioError::Engine(other.into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioTurn {
    pub utterance: String,
    #[serde(default)]
    pub expect: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    #[serde(default = "default_session_id")]
    pub session_id: String,
    pub query: String,
    #[serde(default)]
    pub config: SessionConfig,
    pub script: serde_json::Value,
    pub opening: Vec<String>,
    #[serde(default)]
    pub turns: Vec<ScenarioTurn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_state: Option<SessionState>,
}

fn default_session_id() -> String {
    "scenario".to_string()
}

impl Scenario {
    pub fn parse(text: &str) -> Result<Self, ScenarioError> {
        if text.trim().is_empty() {
            return Err(ScenarioError::FixtureSchema("file is empty".into()));
        }
        let scenario: Scenario =
            serde_json::from_str(text).map_err(|e| ScenarioError::FixtureSchema(e.to_string()))?;
        if scenario.version != 1 {
            return Err(ScenarioError::FixtureSchema(format!(
                "unsupported version {}",
                scenario.version
            )));
        }
        if scenario.query.trim().is_empty() {
            return Err(ScenarioError::FixtureSchema("query is empty".into()));
        }
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ScenarioError::FixtureSchema(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Who said what, in order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranscriptLine {
    pub speaker: &'static str,
    pub text: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub session: Session,
    pub lines: Vec<TranscriptLine>,
    /// Messages produced for the opening and for each turn.
    pub produced: Vec<Vec<String>>,
}

fn compare(location: &str, expected: &[String], actual: &[String]) -> Result<(), ScenarioError> {
    let n = expected.len().max(actual.len());
    for index in 0..n {
        let (e, a) = (expected.get(index), actual.get(index));
        if e != a {
            return Err(ScenarioError::TranscriptMismatch {
                location: location.to_string(),
                index,
                expected: e.cloned(),
                actual: a.cloned(),
            });
        }
    }
    Ok(())
}

/// Plays the scenario without checking expectations.
pub fn play(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let backend = ScriptedBackend::from_value(scenario.script.clone())?;
    let engine = Engine::new(&backend);
    let mut lines = vec![TranscriptLine {
        speaker: "user",
        text: scenario.query.clone(),
    }];
    let opening = engine.start_session_with_id(&scenario.session_id, &scenario.query, scenario.config.clone())?;
    let mut produced = vec![opening.messages.clone()];
    lines.extend(opening.messages.iter().map(|m| TranscriptLine {
        speaker: "assistant",
        text: m.clone(),
    }));
    let mut session = opening.session;
    for turn in &scenario.turns {
        lines.push(TranscriptLine {
            speaker: "user",
            text: turn.utterance.clone(),
        });
        let outcome = engine.handle_utterance(&session, &turn.utterance)?;
        lines.extend(outcome.messages.iter().map(|m| TranscriptLine {
            speaker: "assistant",
            text: m.clone(),
        }));
        produced.push(outcome.messages);
        session = outcome.session;
    }
    Ok(ScenarioRun {
        session,
        lines,
        produced,
    })
}

/// Replays a scenario and checks every produced message byte for byte.
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioRun, ScenarioError> {
    let run = play(scenario)?;
    compare("opening", &scenario.opening, &run.produced[0])?;
    for (i, turn) in scenario.turns.iter().enumerate() {
        compare(&format!("turn {}", i + 1), &turn.expect, &run.produced[i + 1])?;
    }
    if let Some(expected) = scenario.final_state {
        if run.session.state() != expected {
            return Err(ScenarioError::FinalState {
                expected,
                actual: run.session.state(),
            });
        }
    }
    Ok(run)
}

pub fn run_scenario_file(path: &Path) -> Result<ScenarioRun, ScenarioError> {
    run_scenario(&Scenario::load(path)?)
}

/// Rewrites the scenario's expectations with what the engine produces now.
pub fn record(scenario: &Scenario) -> Result<Scenario, ScenarioError> {
    let run = play(scenario)?;
    let mut updated = scenario.clone();
    updated.opening = run.produced[0].clone();
    for (turn, produced) in updated.turns.iter_mut().zip(&run.produced[1..]) {
        turn.expect = produced.clone();
    }
    updated.final_state = Some(run.session.state());
    Ok(updated)
}
