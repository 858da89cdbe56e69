#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rand::seq::IndexedRandom;
use rand::Rng;
use serde_json::json;

use stepwise::model::{echo_params, Backend, ModelError, ModelMetadata, ModelResponse, Params, ScriptedBackend};
use stepwise::protocol::{PromptBundle, PurposeKind};

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// Answers any request with well-formed output derived from the prompt, so
/// arbitrary utterance sequences never hit a script miss.
pub struct SyntheticBackend {
    pub draft: String,
    pub calls: AtomicUsize,
}

impl SyntheticBackend {
    pub fn new(draft: impl Into<String>) -> Self {
        SyntheticBackend {
            draft: draft.into(),
            calls: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl Backend for SyntheticBackend {
    fn complete(&self, bundle: &PromptBundle, n: u32, params: &Params) -> Result<ModelResponse, ModelError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let text = match bundle.purpose {
            PurposeKind::InitialDraft => self.draft.clone(),
            PurposeKind::RegenerateStale => bundle
                .stale
                .iter()
                .map(|o| format!("[Step {o}] regenerated {o} after edit {}", bundle.turn))
                .collect::<Vec<_>>()
                .join("\n\n"),
            PurposeKind::FinalAnswer => "final answer".to_string(),
            PurposeKind::BiasAudit => "no obvious bias".to_string(),
            PurposeKind::Forward => "forwarded reply".to_string(),
        };
        Ok(ModelResponse {
            candidates: vec![text; n.max(1) as usize],
            metadata: ModelMetadata {
                model_version: "synthetic-1".into(),
                parameters: echo_params(n, params),
                confidence: None,
            },
        })
    }
}

/// Random linear chain text with optional ordinal gaps.
pub fn random_steps<R: Rng>(rng: &mut R, len: usize, gaps: bool) -> Vec<(u32, String)> {
    const WORDS: &[&str] = &[
        "assume", "data", "because", "therefore", "dialect", "metric", "fairness", "e.g.", "(see", "model",
        "[Step", "3]", "tokens", "50%", "however", "Step", "weights",
    ];
    let mut ordinal = 0u32;
    (0..len)
        .map(|_| {
            ordinal += if gaps { rng.random_range(1..=3) } else { 1 };
            let words = rng.random_range(1..=12);
            let mut text = String::new();
            for w in 0..words {
                let word = WORDS.choose(rng).unwrap();
                if w > 0 {
                    // a marker at line start would begin a new step
                    let newline = *word != "[Step" && rng.random_bool(0.1);
                    text.push(if newline { '\n' } else { ' ' });
                }
                text.push_str(word);
            }
            (ordinal, text)
        })
        .collect()
}

pub fn render_steps(steps: &[(u32, String)]) -> String {
    steps
        .iter()
        .map(|(o, t)| format!("[Step {o}] {t}"))
        .collect::<Vec<_>>()
        .join("\n\n")
}

/// Scripted fixture for a chain of `len` contiguous steps: the draft at turn
/// 0 and a regeneration for every contiguous ordinal range at turn 1.
pub fn scripted_for(steps: &[(u32, String)]) -> ScriptedBackend {
    let max = steps.len() as u32 + 1;
    let mut entries = vec![json!({
        "key": {"purpose": "InitialDraft", "stale": [], "turn": 0},
        "candidates": [render_steps(steps)],
    })];
    for a in 1..=max {
        for b in a..=max {
            let block: Vec<u32> = (a..=b).collect();
            let text = block
                .iter()
                .map(|o| format!("[Step {o}] regenerated {o} of {a}-{b}"))
                .collect::<Vec<_>>()
                .join("\n\n");
            entries.push(json!({
                "key": {"purpose": "RegenerateStale", "stale": block, "turn": 1},
                "candidates": [text],
            }));
        }
    }
    ScriptedBackend::from_value(json!({"version": 1, "entries": entries})).unwrap()
}

/// One random user utterance. Confirmations appear only if `confirm` is set.
pub fn random_utterance<R: Rng>(rng: &mut R, confirm: bool) -> String {
    let n = rng.random_range(0..=10);
    let m = rng.random_range(0..=10);
    let scope = *["", " (local)", " (cascade)"].choose(rng).unwrap();
    let pick = rng.random_range(0..if confirm { 16 } else { 13 });
    match pick {
        0 => format!("Replace Step {n} with: assume the data is skewed{scope}"),
        1 => format!("delete step {n}{scope}"),
        2 => format!("Merge Steps {n} and {m}"),
        3 => format!("insert after step {n}: check the sample size{scope}"),
        4 => "insert at start: define the terms".to_string(),
        5 => format!("Is there any bias in Step {n}?"),
        6 => "export as json".to_string(),
        7 => "what do you think about this?".to_string(),
        8 => "forward".to_string(),
        9 => "override".to_string(),
        10 => format!("Replace Step {n} with: mail jo@example.com"),
        11 => format!("Remove Step {n} and merge Steps {m} and {}", m + 1),
        12 => format!("Replace Step {n} with: x and continue"),
        13 => "Continue".to_string(),
        14 => "looks good".to_string(),
        _ => "Proceed.".to_string(),
    }
}

pub fn is_confirm(utterance: &str) -> bool {
    let commands = stepwise::protocol::parse_command(utterance);
    commands.len() == 1 && commands[0].kind == stepwise::command::CommandKind::Confirm
}

/// Feeds utterances to a fresh session. Rejected input leaves the session
/// as it was. Returns the final session and, per utterance, the state it
/// arrived in.
pub fn play_sequence(
    backend: &dyn Backend,
    draft_query: &str,
    utterances: &[String],
) -> (stepwise::Session, Vec<stepwise::SessionState>) {
    let engine = stepwise::Engine::new(backend);
    let mut session = engine
        .start_session_with_id("seq", draft_query, stepwise::SessionConfig::default())
        .unwrap()
        .session;
    let mut states = Vec::with_capacity(utterances.len());
    for u in utterances {
        states.push(session.state());
        if let Ok(outcome) = engine.handle_utterance(&session, u) {
            session = outcome.session;
        }
    }
    (session, states)
}

/// The finalization gate for one played sequence.
pub fn gate_holds(session: &stepwise::Session, utterances: &[String], states: &[stepwise::SessionState]) -> bool {
    use stepwise::session::TranscriptEntry;
    use stepwise::SessionState;
    let finalized = session.transcript().iter().any(|e| {
        matches!(e.entry, TranscriptEntry::StateChanged { to: SessionState::Finalizing, .. })
    });
    let confirmed_in_review = utterances
        .iter()
        .zip(states)
        .any(|(u, s)| is_confirm(u) && *s == SessionState::AwaitingReview);
    let reached_done = session.state() == SessionState::Done || session.final_answer().is_some();
    if !utterances.iter().any(|u| is_confirm(u)) {
        !finalized && !reached_done
    } else {
        !reached_done || confirmed_in_review
    }
}
