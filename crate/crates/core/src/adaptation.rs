//! Learning from user revisions.
//!
//! Every (original, revision) pair the user produces is logged. Each pair
//! nudges a six-component preference vector towards the style difference
//! between the two texts via an exponentially weighted moving average:
//!
//! ```text
//! p <- clamp((1 - alpha) * p + alpha * (features(revision) - features(original)), -1, 1)
//! ```
//!
//! The vector is then used two ways: candidate completions are reranked by
//! `p . features(candidate)`, and components whose magnitude exceeds a
//! threshold become fixed style directives in later prompts.

use std::io::{BufRead, Write};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::StepId;

pub const FEATURES: usize = 6;
pub const DEFAULT_ALPHA: f64 = 0.3;
pub const DEFAULT_THETA: f64 = 0.25;
pub const EDIT_LOG_SCHEMA: u32 = 1;

const COUNTEREXAMPLE: &[&[&str]] = &[&["counterexample"], &["however"], &["but"], &["instead"], &["unless"]];
const ASSUMPTION: &[&[&str]] = &[&["assume"], &["assumes"], &["suppose"], &["presumably"], &["given", "that"]];
const HEDGING: &[&[&str]] = &[&["may"], &["might"], &["could"], &["possibly"], &["perhaps"]];
// "e.g." is stored the way the tokenizer leaves it.
const EVIDENCE: &[&[&str]] = &[&["e.g"], &["for", "example"], &["such", "as"], &["studies"], &["evidence"]];

/// (positive, negative) directive per feature, in feature order.
const DIRECTIVES: [(&str, &str); FEATURES] = [
    (
        "Give fuller, more detailed steps.",
        "Keep each step short and direct.",
    ),
    (
        "Prefer concrete counterexamples over unexamined assumptions.",
        "Avoid digressing into counterexamples unless they change the conclusion.",
    ),
    (
        "State underlying assumptions explicitly.",
        "Avoid introducing unexamined assumptions.",
    ),
    (
        "Acknowledge uncertainty where it exists.",
        "State conclusions directly without hedging.",
    ),
    (
        "Raise open questions the user should consider.",
        "Make declarative claims rather than posing questions.",
    ),
    (
        "Support claims with examples or evidence.",
        "Keep to the core argument without piling on examples.",
    ),
];

#[derive(Debug, Error)]
pub enum AdaptationError {
    #[error("revision is identical to the original text")]
    IdenticalTexts,
    #[error("edit log line {line}: {source}")]
    BadLogLine {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("edit log line {line}: unsupported schema {found}")]
    UnsupportedSchema { line: usize, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Style features, each in [0, 1]: length, counterexample density,
/// assumption density, hedging density, question density, evidence density.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURES]);

impl FeatureVector {
    pub fn sub(&self, other: &FeatureVector) -> [f64; FEATURES] {
        std::array::from_fn(|i| self.0[i] - other.0[i])
    }
}

fn count_markers(tokens: &[String], lexicon: &[&[&str]]) -> usize {
    (0..tokens.len())
        .map(|i| {
            lexicon
                .iter()
                .filter(|phrase| {
                    tokens.len() - i >= phrase.len()
                        && phrase.iter().zip(&tokens[i..]).all(|(w, t)| *w == t)
                })
                .count()
        })
        .sum()
}

/// Deterministic style features of `text`.
///
/// Tokens are the lowercase whitespace-separated words with surrounding
/// ASCII punctuation removed; tokens that are pure punctuation are dropped.
/// Each density is `min(1, markers / tokens)`.
pub fn extract_features(text: &str) -> FeatureVector {
    let mut tokens = Vec::new();
    let mut questions = 0usize;
    for raw in text.to_lowercase().split_whitespace() {
        let token = raw.trim_matches(|c: char| c.is_ascii_punctuation());
        if token.is_empty() {
            continue;
        }
        if raw.ends_with('?') {
            questions += 1;
        }
        tokens.push(token.to_string());
    }
    if tokens.is_empty() {
        return FeatureVector::default();
    }
    let n = tokens.len() as f64;
    let density = |count: usize| (count as f64 / n).min(1.0);
    FeatureVector([
        (n / 100.0).min(1.0),
        density(count_markers(&tokens, COUNTEREXAMPLE)),
        density(count_markers(&tokens, ASSUMPTION)),
        density(count_markers(&tokens, HEDGING)),
        density(questions),
        density(count_markers(&tokens, EVIDENCE)),
    ])
}

/// One logged (original, revision) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EditRecord {
    pub session_id: String,
    pub step_id: StepId,
    pub original: String,
    pub revision: String,
    pub timestamp: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceVector {
    pub p: [f64; FEATURES],
    pub update_count: u64,
    pub alpha: f64,
}

impl Default for PreferenceVector {
    fn default() -> Self {
        Self::with_alpha(DEFAULT_ALPHA)
    }
}

impl PreferenceVector {
    pub fn with_alpha(alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha <= 1.0, "alpha must lie in (0, 1]");
        PreferenceVector {
            p: [0.0; FEATURES],
            update_count: 0,
            alpha,
        }
    }

    /// One EWMA step towards `delta`, clamped to [-1, 1].
    pub fn updated(&self, delta: &[f64; FEATURES]) -> PreferenceVector {
        let a = self.alpha;
        PreferenceVector {
            p: std::array::from_fn(|i| ((1.0 - a) * self.p[i] + a * delta[i]).clamp(-1.0, 1.0)),
            update_count: self.update_count + 1,
            alpha: a,
        }
    }

    pub fn score(&self, features: &FeatureVector) -> f64 {
        self.p.iter().zip(features.0.iter()).map(|(p, f)| p * f).sum()
    }
}

/// Logs `record` and returns the updated preference vector.
pub fn record_edit(
    log: &mut Vec<EditRecord>,
    pref: &PreferenceVector,
    record: EditRecord,
) -> Result<PreferenceVector, AdaptationError> {
    if record.original == record.revision {
        return Err(AdaptationError::IdenticalTexts);
    }
    let delta = extract_features(&record.revision).sub(&extract_features(&record.original));
    log.push(record);
    Ok(pref.updated(&delta))
}

/// Orders candidates by descending preference score. Ties keep input order.
pub fn rerank<S: AsRef<str> + Clone>(candidates: &[S], pref: &PreferenceVector) -> Vec<S> {
    rerank_indices(candidates, pref)
        .into_iter()
        .map(|i| candidates[i].clone())
        .collect()
}

/// Like [`rerank`] but returns the permutation.
pub fn rerank_indices<S: AsRef<str>>(candidates: &[S], pref: &PreferenceVector) -> Vec<usize> {
    let scores: Vec<f64> = candidates
        .iter()
        // + 0.0 folds -0.0 into 0.0, which total_cmp would otherwise order
        .map(|c| pref.score(&extract_features(c.as_ref())) + 0.0)
        .collect();
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    // sort_by is stable
    order.sort_by(|a, b| scores[*b].total_cmp(&scores[*a]));
    order
}

/// Style directives for every component with `|p_i| > theta`, in feature order.
pub fn synthesize_directives(pref: &PreferenceVector, theta: f64) -> Vec<String> {
    pref.p
        .iter()
        .zip(DIRECTIVES.iter())
        .filter_map(|(p, (pos, neg))| {
            if *p > theta {
                Some(pos.to_string())
            } else if *p < -theta {
                Some(neg.to_string())
            } else {
                None
            }
        })
        .collect()
}

#[derive(Serialize, Deserialize)]
struct LogLine<R> {
    schema: u32,
    #[serde(flatten)]
    record: R,
}

/// Appends records as JSON lines.
pub fn write_edit_log<W: Write>(mut out: W, records: &[EditRecord]) -> Result<(), AdaptationError> {
    for record in records {
        let line = serde_json::to_string(&LogLine {
            schema: EDIT_LOG_SCHEMA,
            record,
        })
        .expect("edit records always serialize");
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn read_edit_log<R: BufRead>(input: R) -> Result<Vec<EditRecord>, AdaptationError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: LogLine<EditRecord> =
            serde_json::from_str(&line).map_err(|source| AdaptationError::BadLogLine { line: i + 1, source })?;
        if parsed.schema != EDIT_LOG_SCHEMA {
            return Err(AdaptationError::UnsupportedSchema {
                line: i + 1,
                found: parsed.schema,
            });
        }
        records.push(parsed.record);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(original: &str, revision: &str) -> EditRecord {
        EditRecord {
            session_id: "s".into(),
            step_id: serde_json::from_str("1").unwrap(),
            original: original.into(),
            revision: revision.into(),
            timestamp: DateTime::from_timestamp(0, 0).unwrap(),
        }
    }

    // Expected values below come from a standalone reference script
    // implementing the same tokenizer and lexicons.
    #[test]
    fn features_reference_values() {
        assert_eq!(extract_features("").0, [0.0; 6]);
        assert_eq!(extract_features("Assume X. Suppose Y.").0, [0.04, 0.0, 0.5, 0.0, 0.0, 0.0]);
        let one_per_fifty = format!("however{}", " word".repeat(49));
        assert_eq!(extract_features(&one_per_fifty).0, [0.5, 0.02, 0.0, 0.0, 0.0, 0.0]);
        let mixed = "However, this might fail. Is it true? Studies (e.g., surveys) show, for example, such gains.";
        let f = extract_features(mixed).0;
        let expected = [0.15, 1.0 / 15.0, 0.0, 1.0 / 15.0, 1.0 / 15.0, 0.2];
        for (got, want) in f.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12, "{f:?}");
        }
    }

    #[test]
    fn identical_texts_rejected() {
        let mut log = Vec::new();
        let err = record_edit(&mut log, &PreferenceVector::default(), record("x", "x")).unwrap_err();
        assert!(matches!(err, AdaptationError::IdenticalTexts));
        assert!(log.is_empty());
    }

    #[test]
    fn single_update_arithmetic() {
        let pref = PreferenceVector::default();
        let next = pref.updated(&[0.0, 0.5, 0.0, 0.0, 0.0, 0.0]);
        assert!((next.p[1] - 0.15).abs() < 1e-15);
        assert_eq!(next.update_count, 1);
    }

    #[test]
    fn record_edit_logs_and_counts() {
        let mut log = Vec::new();
        let pref = record_edit(&mut log, &PreferenceVector::default(), record("Assume X.", "However X.")).unwrap();
        assert_eq!(log.len(), 1);
        assert_eq!(pref.update_count, 1);
        // delta is (0, 0.5, -0.5, 0, 0, 0) over two tokens
        assert!((pref.p[1] - 0.15).abs() < 1e-12);
        assert!((pref.p[2] + 0.15).abs() < 1e-12);
    }

    #[test]
    fn rerank_prefers_counterexamples() {
        let pref = PreferenceVector {
            p: [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
            update_count: 1,
            alpha: DEFAULT_ALPHA,
        };
        let a = "The data is sufficient for the task.";
        let b = "However the data is thin, but it helps.";
        assert_eq!(rerank(&[a, b], &pref), vec![b, a]);
        assert_eq!(rerank(&[a], &pref), vec![a]);
        assert_eq!(rerank(&[b, a], &PreferenceVector::default()), vec![b, a]);
    }

    #[test]
    fn directives_table() {
        let mut pref = PreferenceVector::default();
        assert!(synthesize_directives(&pref, DEFAULT_THETA).is_empty());
        pref.p[1] = 0.4;
        assert_eq!(
            synthesize_directives(&pref, DEFAULT_THETA),
            vec!["Prefer concrete counterexamples over unexamined assumptions."]
        );
        pref.p[3] = -0.4;
        assert_eq!(
            synthesize_directives(&pref, DEFAULT_THETA),
            vec![
                "Prefer concrete counterexamples over unexamined assumptions.",
                "State conclusions directly without hedging."
            ]
        );
        pref.p = [0.25, -0.25, 0.0, 0.0, 0.0, 0.0];
        assert!(synthesize_directives(&pref, DEFAULT_THETA).is_empty(), "threshold is strict");
    }

    #[test]
    fn edit_log_jsonl() {
        let records = vec![record("a", "b"), record("c", "d")];
        let mut buf = Vec::new();
        write_edit_log(&mut buf, &records).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert!(text.starts_with("{\"schema\":1,"));
        assert_eq!(read_edit_log(buf.as_slice()).unwrap(), records);
        let bad = text.replace("\"schema\":1", "\"schema\":9");
        assert!(matches!(
            read_edit_log(bad.as_bytes()),
            Err(AdaptationError::UnsupportedSchema { line: 1, found: 9 })
        ));
    }
}
