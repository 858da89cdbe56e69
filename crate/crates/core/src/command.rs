//! Structured user intents produced by the utterance parser.

use serde::{Deserialize, Serialize};

/// How far an edit reaches downstream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EditScope {
    /// Every graph descendant of the edited step goes stale.
    #[default]
    Cascade,
    /// Only the edited step changes.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    #[default]
    Markdown,
    Json,
}

impl ExportFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            ExportFormat::Markdown => "markdown",
            ExportFormat::Json => "json",
        }
    }
}

impl std::str::FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(ExportFormat::Markdown),
            "json" => Ok(ExportFormat::Json),
            other => Err(format!("unknown export format `{other}`")),
        }
    }
}

/// What the user asked for. Step targets are display ordinals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CommandKind {
    Replace { target: u32, text: String },
    Delete { target: u32 },
    Merge { first: u32, second: u32 },
    /// `after: None` inserts at the front of the chain.
    Insert { after: Option<u32>, text: String },
    Confirm,
    BiasCheck { target: u32 },
    Export { format: ExportFormat },
    /// Unrecognized utterance, kept verbatim.
    Freeform { raw: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditCommand {
    #[serde(flatten)]
    pub kind: CommandKind,
    #[serde(default)]
    pub scope: EditScope,
}

impl EditCommand {
    pub fn new(kind: CommandKind) -> Self {
        EditCommand {
            kind,
            scope: EditScope::Cascade,
        }
    }

    pub fn with_scope(mut self, scope: EditScope) -> Self {
        self.scope = scope;
        self
    }

    /// Replace, Delete, Merge and Insert change the chain; everything else does not.
    pub fn is_structural(&self) -> bool {
        matches!(
            self.kind,
            CommandKind::Replace { .. }
                | CommandKind::Delete { .. }
                | CommandKind::Merge { .. }
                | CommandKind::Insert { .. }
        )
    }

    /// Short human-readable label, used in acknowledgements and exports.
    pub fn describe(&self) -> String {
        match &self.kind {
            CommandKind::Replace { target, .. } => format!("Replace Step {target}"),
            CommandKind::Delete { target } => format!("Delete Step {target}"),
            CommandKind::Merge { first, second } => format!("Merge Steps {first} and {second}"),
            CommandKind::Insert { after: Some(n), .. } => format!("Insert after Step {n}"),
            CommandKind::Insert { after: None, .. } => "Insert at start".to_string(),
            CommandKind::Confirm => "Confirm".to_string(),
            CommandKind::BiasCheck { target } => format!("Bias check on Step {target}"),
            CommandKind::Export { format } => format!("Export as {}", format.as_str()),
            CommandKind::Freeform { .. } => "Freeform".to_string(),
        }
    }
}
