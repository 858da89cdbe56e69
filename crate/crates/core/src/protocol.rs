//! Text protocol: the canonical `[Step N]` chain format, the edit-command
//! grammar, and prompt assembly around the embedded system prompt.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{ChainError, ReasoningChain};
use crate::command::{CommandKind, EditCommand, EditScope, ExportFormat};
use crate::lifecycle::SessionState;
use crate::session::{Session, TranscriptEntry};

/// System prompt sent with every model call.
pub const SYSTEM_PROMPT: &str = include_str!("system_prompt.txt");

/// Question that closes every draft or regeneration.
pub const REVIEW_QUESTION: &str = "Do you want to edit any step before I generate the final answer?";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("no [Step N] markers found")]
    NoStepsFound,
    #[error("step ordinals must increase: {previous} is followed by {next}")]
    NonIncreasingOrdinals { previous: u32, next: u32 },
    #[error("step ordinal {0} appears more than once")]
    DuplicateOrdinal(u32),
    #[error("step {0} has no text")]
    EmptyStep(u32),
    #[error("cannot build a {purpose:?} prompt in state {state:?}")]
    PurposeStateMismatch { purpose: PurposeKind, state: SessionState },
    #[error(transparent)]
    Chain(#[from] ChainError),
}

static STEP_MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^\[Step (\d+)\]").unwrap());

/// Steps pulled out of a model reply, plus whatever prose surrounded them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedSteps {
    pub steps: Vec<(u32, String)>,
    /// Text before the first marker, trimmed.
    pub prose: String,
}

/// Splits text on line-anchored `[Step N]` markers.
pub fn parse_steps(text: &str) -> Result<ParsedSteps, ProtocolError> {
    let markers: Vec<(usize, usize, &str)> = STEP_MARKER
        .captures_iter(text)
        .map(|c| {
            let whole = c.get(0).unwrap();
            (whole.start(), whole.end(), c.get(1).unwrap().as_str())
        })
        .collect();
    if markers.is_empty() {
        return Err(ProtocolError::NoStepsFound);
    }

    let prose = text[..markers[0].0].trim().to_string();
    let mut steps: Vec<(u32, String)> = Vec::with_capacity(markers.len());
    for (i, (_, body_start, digits)) in markers.iter().enumerate() {
        // Oversized numbers cannot be addressed by the user anyway.
        let ordinal: u32 = digits.parse().map_err(|_| ProtocolError::NoStepsFound)?;
        let body_end = markers.get(i + 1).map_or(text.len(), |m| m.0);
        let body = text[*body_start..body_end].trim();
        if let Some((previous, _)) = steps.last() {
            if ordinal == *previous || steps.iter().any(|(o, _)| *o == ordinal) {
                return Err(ProtocolError::DuplicateOrdinal(ordinal));
            }
            if ordinal < *previous {
                return Err(ProtocolError::NonIncreasingOrdinals {
                    previous: *previous,
                    next: ordinal,
                });
            }
        }
        if ordinal == 0 {
            return Err(ProtocolError::Chain(ChainError::ZeroOrdinal));
        }
        if body.is_empty() {
            return Err(ProtocolError::EmptyStep(ordinal));
        }
        steps.push((ordinal, body.to_string()));
    }
    Ok(ParsedSteps { steps, prose })
}

/// Parses a model reply into a fresh chain under the linear dependency policy.
pub fn parse_chain(text: &str) -> Result<ReasoningChain, ProtocolError> {
    let parsed = parse_steps(text)?;
    Ok(ReasoningChain::new(&parsed.steps)?)
}

/// Canonical text form: `[Step N] text` blocks separated by one blank line.
pub fn render_chain(chain: &ReasoningChain) -> String {
    chain
        .steps()
        .iter()
        .map(|s| format!("[Step {}] {}", s.ordinal, s.text))
        .collect::<Vec<_>>()
        .join("\n\n")
}

static SCOPE_SUFFIX: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)\s*\((local|cascade)\)\s*[.!]?\s*$").unwrap());
static REPLACE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)^replace\s+step\s+(\d+)\s+with\s*:?\s*(.+)$").unwrap());
static DELETE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^(?:delete|remove)\s+step\s+(\d+)$").unwrap());
static MERGE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^merge\s+steps?\s+(\d+)\s+and\s+(\d+)$").unwrap());
static INSERT_AFTER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)^insert\s+after\s+step\s+(\d+)\s*:\s*(.+)$").unwrap());
static INSERT_START: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)^insert\s+at\s+(?:the\s+)?start\s*:\s*(.+)$").unwrap());
static CONFIRM: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?is)^(?:continue|proceed|looks\s+good)\b").unwrap());
static BIAS: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^is\s+there\s+(?:any\s+)?bias\s+in\s+step\s+(\d+)$").unwrap());
static EXPORT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^export(?:\s+as\s+(markdown|md|json))?$").unwrap());
static AND: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i) and ").unwrap());

fn ordinal(digits: &str) -> Option<u32> {
    digits.parse::<u32>().ok().filter(|n| *n > 0)
}

fn text_arg(s: &str) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

/// Recognizes a single clause, or returns `None`.
fn parse_clause(clause: &str, default_scope: EditScope) -> Option<EditCommand> {
    let clause = clause.trim();
    let (clause, scope) = match SCOPE_SUFFIX.captures(clause) {
        Some(c) => {
            let scope = if c[1].eq_ignore_ascii_case("local") {
                EditScope::Local
            } else {
                EditScope::Cascade
            };
            (&clause[..c.get(0).unwrap().start()], Some(scope))
        }
        None => (clause, None),
    };
    // keyword-only clauses tolerate trailing punctuation
    let bare = clause.trim_end_matches(['.', '!', '?', ' ']);

    let kind = if let Some(c) = REPLACE.captures(clause) {
        CommandKind::Replace {
            target: ordinal(&c[1])?,
            text: text_arg(&c[2])?,
        }
    } else if let Some(c) = DELETE.captures(bare) {
        CommandKind::Delete { target: ordinal(&c[1])? }
    } else if let Some(c) = MERGE.captures(bare) {
        CommandKind::Merge {
            first: ordinal(&c[1])?,
            second: ordinal(&c[2])?,
        }
    } else if let Some(c) = INSERT_AFTER.captures(clause) {
        CommandKind::Insert {
            after: Some(ordinal(&c[1])?),
            text: text_arg(&c[2])?,
        }
    } else if let Some(c) = INSERT_START.captures(clause) {
        CommandKind::Insert {
            after: None,
            text: text_arg(&c[1])?,
        }
    } else if scope.is_none() && CONFIRM.is_match(bare) {
        CommandKind::Confirm
    } else if let Some(c) = BIAS.captures(bare).filter(|_| scope.is_none()) {
        CommandKind::BiasCheck { target: ordinal(&c[1])? }
    } else {
        let c = EXPORT.captures(bare).filter(|_| scope.is_none())?;
        let format = c
            .get(1)
            .map(|m| m.as_str().parse().expect("regex admits only known formats"))
            .unwrap_or(ExportFormat::Markdown);
        CommandKind::Export { format }
    };

    let mut command = EditCommand::new(kind);
    if command.is_structural() {
        command.scope = scope.unwrap_or(default_scope);
    } else if scope.is_some() {
        return None;
    }
    Some(command)
}

/// Finds a split of `text[from..]` into recognized clauses joined by " and ".
fn parse_sequence(
    text: &str,
    from: usize,
    splits: &[(usize, usize)],
    default_scope: EditScope,
    memo: &mut HashMap<usize, Option<Vec<EditCommand>>>,
) -> Option<Vec<EditCommand>> {
    if let Some(hit) = memo.get(&from) {
        return hit.clone();
    }
    let mut result = None;
    for &(start, end) in splits.iter().filter(|(s, _)| *s > from) {
        let Some(head) = parse_clause(&text[from..start], default_scope) else {
            continue;
        };
        if let Some(mut tail) = parse_sequence(text, end, splits, default_scope, memo) {
            tail.insert(0, head);
            result = Some(tail);
            break;
        }
    }
    if result.is_none() {
        result = parse_clause(&text[from..], default_scope).map(|c| vec![c]);
    }
    memo.insert(from, result.clone());
    result
}

/// Parses a user utterance into one or more commands. Never fails:
/// anything unrecognized becomes a single `Freeform` command.
pub fn parse_command(utterance: &str) -> Vec<EditCommand> {
    parse_command_with_scope(utterance, EditScope::Cascade)
}

/// Like [`parse_command`], but structural commands without an explicit
/// `(local)`/`(cascade)` suffix take `default_scope`.
pub fn parse_command_with_scope(utterance: &str, default_scope: EditScope) -> Vec<EditCommand> {
    let text = utterance.trim();
    let splits: Vec<(usize, usize)> = AND.find_iter(text).map(|m| (m.start(), m.end())).collect();
    let mut memo = HashMap::new();
    match parse_sequence(text, 0, &splits, default_scope, &mut memo) {
        Some(commands) => commands,
        None => vec![EditCommand::new(CommandKind::Freeform {
            raw: utterance.to_string(),
        })],
    }
}

/// Why a prompt is being built. Carries the data the instruction needs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Purpose {
    InitialDraft,
    /// Regenerate exactly these ordinals.
    RegenerateStale(Vec<u32>),
    FinalAnswer,
    BiasAudit(u32),
    /// A freeform utterance the user explicitly chose to send to the model.
    Forward(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PurposeKind {
    InitialDraft,
    RegenerateStale,
    FinalAnswer,
    BiasAudit,
    Forward,
}

impl Purpose {
    pub fn kind(&self) -> PurposeKind {
        match self {
            Purpose::InitialDraft => PurposeKind::InitialDraft,
            Purpose::RegenerateStale(_) => PurposeKind::RegenerateStale,
            Purpose::FinalAnswer => PurposeKind::FinalAnswer,
            Purpose::BiasAudit(_) => PurposeKind::BiasAudit,
            Purpose::Forward(_) => PurposeKind::Forward,
        }
    }

    fn required_state(&self) -> SessionState {
        match self {
            Purpose::InitialDraft => SessionState::Drafting,
            Purpose::RegenerateStale(_) => SessionState::Regenerating,
            Purpose::FinalAnswer => SessionState::Finalizing,
            Purpose::BiasAudit(_) | Purpose::Forward(_) => SessionState::AwaitingReview,
        }
    }
}

/// Everything sent to a model for one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub system: String,
    pub context: String,
    pub instruction: String,
    pub directives: Vec<String>,
    pub purpose: PurposeKind,
    /// Ordinals the call is about: stale steps, or the audited step.
    pub stale: Vec<u32>,
    /// Number of structural edits applied before this call.
    pub turn: u32,
}

impl PromptBundle {
    /// The user-role message: context, learned style notes, then the instruction.
    pub fn user_message(&self) -> String {
        let mut out = self.context.clone();
        if !self.directives.is_empty() {
            out.push_str("\n\nStyle notes learned from this user's earlier revisions:");
            for (i, d) in self.directives.iter().enumerate() {
                out.push_str(&format!("\n{}. {}", i + 1, d));
            }
        }
        out.push_str("\n\n");
        out.push_str(&self.instruction);
        out
    }
}

/// "Step 5", "Steps 3 and 4", "Steps 5, 6, 7, 8 and 9".
pub fn step_list(ordinals: &[u32]) -> String {
    match ordinals {
        [] => "no steps".to_string(),
        [one] => format!("Step {one}"),
        [init @ .., last] => {
            let head: Vec<String> = init.iter().map(u32::to_string).collect();
            format!("Steps {} and {}", head.join(", "), last)
        }
    }
}

fn recent_utterances(session: &Session, limit: usize) -> Vec<&str> {
    let mut recent: Vec<&str> = session
        .transcript()
        .iter()
        .rev()
        .filter_map(|e| match &e.entry {
            TranscriptEntry::Utterance { text } => Some(text.as_str()),
            _ => None,
        })
        .take(limit)
        .collect();
    recent.reverse();
    recent
}

/// Assembles the prompt for one model call.
pub fn render_prompt(
    session: &Session,
    purpose: &Purpose,
    directives: &[String],
) -> Result<PromptBundle, ProtocolError> {
    if session.state() != purpose.required_state() {
        return Err(ProtocolError::PurposeStateMismatch {
            purpose: purpose.kind(),
            state: session.state(),
        });
    }

    let mut context = format!("User query:\n{}", session.query());
    if !session.chain().is_empty() {
        context.push_str("\n\nCurrent reasoning chain:\n");
        context.push_str(&render_chain(session.chain()));
    }
    let recent = recent_utterances(session, 3);
    if !recent.is_empty() {
        context.push_str("\n\nRecent user messages:");
        for u in recent {
            context.push_str("\n- ");
            context.push_str(u);
        }
    }

    let (instruction, stale) = match purpose {
        Purpose::InitialDraft => (
            "Generate a clear, step-by-step reasoning chain for the user query. \
             Label each step [Step 1], [Step 2], and so on, each at the start of its own line."
                .to_string(),
            Vec::new(),
        ),
        Purpose::RegenerateStale(ordinals) => (
            format!(
                "The user edited the chain. Regenerate only {} so they follow from the updated steps. \
                 Re-emit each regenerated step with its original label ({}). \
                 Do not repeat or change any other step.",
                step_list(ordinals),
                ordinals
                    .iter()
                    .map(|o| format!("[Step {o}]"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            ordinals.clone(),
        ),
        Purpose::FinalAnswer => (
            "The user confirmed the reasoning chain. Generate the final answer \
             based strictly on the most recent version of the reasoning chain."
                .to_string(),
            Vec::new(),
        ),
        Purpose::BiasAudit(target) => {
            let step = session
                .chain()
                .by_ordinal(*target)
                .ok_or(ChainError::UnknownStep(*target))?;
            (crate::safeguards::build_bias_prompt(step), vec![*target])
        }
        Purpose::Forward(raw) => (
            format!(
                "The user sent this message about the reasoning chain. Respond to it without \
                 changing any step:\n{raw}"
            ),
            Vec::new(),
        ),
    };

    Ok(PromptBundle {
        system: SYSTEM_PROMPT.to_string(),
        context,
        instruction,
        directives: directives.to_vec(),
        purpose: purpose.kind(),
        stale,
        turn: session.edit_count(),
    })
}
