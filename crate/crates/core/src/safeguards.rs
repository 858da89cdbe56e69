//! Transparency and privacy safeguards: model disclosure blocks, bias-audit
//! prompts, and pattern-based detection of personal data.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::chain::ReasoningStep;
use crate::model::ModelMetadata;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PiiKind {
    Email,
    PhoneNumber,
    NationalId,
    PaymentCard,
}

impl PiiKind {
    pub fn label(self) -> &'static str {
        match self {
            PiiKind::Email => "email address",
            PiiKind::PhoneNumber => "phone number",
            PiiKind::NationalId => "national ID number",
            PiiKind::PaymentCard => "payment card number",
        }
    }
}

/// A detected span. `start`/`end` are character offsets, end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PiiFinding {
    pub kind: PiiKind,
    pub start: usize,
    pub end: usize,
    /// The match with all but its last two characters masked.
    pub preview: String,
}

static EMAIL: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"[A-Za-z0-9._%+-]+@[A-Za-z0-9-]+(?:\.[A-Za-z0-9-]+)*\.[A-Za-z]{2,}").unwrap()
});
static PHONE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\+1[ .-]?)?(?:\(\d{3}\) ?|\d{3}[ .-])\d{3}[ .-]\d{4}").unwrap()
});
static NATIONAL_ID: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d{3}-\d{2}-\d{4}").unwrap());
static CARD: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d(?:[ -]?\d){12,15}").unwrap());

/// Standard Luhn mod-10 check over the digits of `s`.
pub fn luhn_valid(s: &str) -> bool {
    let digits: Vec<u32> = s.chars().filter_map(|c| c.to_digit(10)).collect();
    if digits.is_empty() {
        return false;
    }
    let sum: u32 = digits
        .iter()
        .rev()
        .enumerate()
        .map(|(i, d)| {
            if i % 2 == 1 {
                let doubled = d * 2;
                if doubled > 9 { doubled - 9 } else { doubled }
            } else {
                *d
            }
        })
        .sum();
    sum.is_multiple_of(10)
}

fn mask(value: &str) -> String {
    let chars: Vec<char> = value.chars().collect();
    let keep = if chars.len() > 2 { 2 } else { 0 };
    let mut out = "*".repeat(chars.len() - keep);
    out.extend(&chars[chars.len() - keep..]);
    out
}

/// A match must not be glued to further digits (or hyphens, for IDs).
fn isolated(text: &str, start: usize, end: usize, extra: &[char]) -> bool {
    let before = text[..start].chars().next_back();
    let after = text[end..].chars().next();
    let blocks = |c: Option<char>| c.is_some_and(|c| c.is_ascii_digit() || extra.contains(&c));
    !blocks(before) && !blocks(after)
}

/// Scans `text` for the four supported kinds. Findings are sorted by
/// start offset; different kinds may overlap.
pub fn detect_pii(text: &str) -> Vec<PiiFinding> {
    let mut raw: Vec<(PiiKind, usize, usize)> = Vec::new();
    for m in EMAIL.find_iter(text) {
        raw.push((PiiKind::Email, m.start(), m.end()));
    }
    for m in PHONE.find_iter(text) {
        if isolated(text, m.start(), m.end(), &[]) {
            raw.push((PiiKind::PhoneNumber, m.start(), m.end()));
        }
    }
    for m in NATIONAL_ID.find_iter(text) {
        if isolated(text, m.start(), m.end(), &['-']) {
            raw.push((PiiKind::NationalId, m.start(), m.end()));
        }
    }
    for m in CARD.find_iter(text) {
        if isolated(text, m.start(), m.end(), &[]) && luhn_valid(m.as_str()) {
            raw.push((PiiKind::PaymentCard, m.start(), m.end()));
        }
    }
    raw.sort_by_key(|(kind, start, end)| (*start, *end, *kind));

    let char_offset = |byte: usize| text[..byte].chars().count();
    raw.into_iter()
        .map(|(kind, start, end)| PiiFinding {
            kind,
            start: char_offset(start),
            end: char_offset(end),
            preview: mask(&text[start..end]),
        })
        .collect()
}

/// One-line privacy reminder for a non-empty set of findings.
pub fn privacy_reminder(findings: &[PiiFinding], in_user_edit: bool) -> String {
    let listed: Vec<String> = findings
        .iter()
        .map(|f| format!("{} ({})", f.kind.label(), f.preview))
        .collect();
    let source = if in_user_edit { "your edit" } else { "the model output" };
    format!(
        "Privacy reminder: possible identifiable information detected in {source}: {}.",
        listed.join(", ")
    )
}

/// Disclosed model metadata, with its rendered text block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Disclosure {
    pub model_version: String,
    pub parameters: String,
    pub confidence: Option<f64>,
    pub rendered: String,
}

fn render_value(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

pub fn build_disclosure(metadata: &ModelMetadata) -> Disclosure {
    // BTreeMap iteration is already key-sorted
    let parameters = if metadata.parameters.is_empty() {
        "(none)".to_string()
    } else {
        metadata
            .parameters
            .iter()
            .map(|(k, v)| format!("{k}={}", render_value(v)))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let mut rendered = format!(
        "Model disclosure:\nversion: {}\nparameters: {}",
        metadata.model_version, parameters
    );
    if let Some(c) = metadata.confidence {
        rendered.push_str(&format!("\nconfidence: {c}"));
    }
    Disclosure {
        model_version: metadata.model_version.clone(),
        parameters,
        confidence: metadata.confidence,
        rendered,
    }
}

/// Audit instruction for one step. Pure function of the step.
pub fn build_bias_prompt(step: &ReasoningStep) -> String {
    format!(
        "Is there any bias in Step {n}?\n\n[Step {n}] {text}\n\n\
         Self-audit or reframe the logic of Step {n}: name any assumptions, framings, or omissions \
         in it that could introduce bias, and describe how the step could be reframed. \
         Do not rewrite any other step.",
        n = step.ordinal,
        text = step.text.trim()
    )
}
