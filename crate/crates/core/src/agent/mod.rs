//! The debugging loop: a task planner dispatching a GUI operator and a code
//! fixer, each driven by a pluggable [`Reasoner`].

mod fixer;
mod operator;
mod planner;
mod reasoner;
mod run;
mod trace;

use serde::{Deserialize, Serialize};

use crate::eval::Usage;
use crate::ies::Selector;
use crate::raster::RasterImage;

pub use fixer::{apply_patch, FileEdit, Fixer, FixError, Patch, PatchEdit};
pub use operator::{describe_observation, BugKind, BugReport, Operator, OperatorResult};
pub use planner::{FeedbackEntry, PlanAction, PlannerState, PlannerStatus, Subtask, SubtaskKind};
pub use reasoner::{
    default_planner_rules, load_reasoner_config, RemoteReasoner, ReasonerConfig, Rule, RuleFile, ScriptedReasoner,
};
pub use run::{run_debug_loop, Ablation, DebugConfig, DebugOutcome, Reasoners};
pub use trace::{DebugTrace, TraceEvent};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Planner,
    Operator,
    Fixer,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Planner => "planner",
            Role::Operator => "operator",
            Role::Fixer => "fixer",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionKind {
    Plan,
    Interact,
    ReportBug,
    Edit,
    Finish,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractAction {
    Click,
    InputText,
    Select,
}

/// Structured reasoner output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decision {
    #[serde(rename = "type")]
    pub kind: DecisionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<Selector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<InteractAction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edits: Option<Vec<FileEdit>>,
}

impl Decision {
    pub fn finish() -> Self {
        Self {
            kind: DecisionKind::Finish,
            target: None,
            action: None,
            payload: None,
            report: None,
            edits: None,
        }
    }

    /// Checks the fields each decision type requires.
    pub fn validate(&self) -> Result<(), ReasonerError> {
        let bad = |m: &str| Err(ReasonerError::Malformed(m.to_string()));
        match self.kind {
            DecisionKind::Plan => match self.payload.as_deref() {
                Some("operator" | "fixer") => Ok(()),
                _ => bad("plan needs payload `operator` or `fixer`"),
            },
            DecisionKind::Interact => {
                if self.target.is_none() {
                    return bad("interact needs a target");
                }
                match (self.action, &self.payload) {
                    (None, _) => bad("interact needs an action"),
                    (Some(InteractAction::InputText | InteractAction::Select), None) => {
                        bad("input_text and select need a payload")
                    }
                    _ => Ok(()),
                }
            }
            DecisionKind::ReportBug => match self.report.as_deref() {
                Some(r) if !r.trim().is_empty() => Ok(()),
                _ => bad("report_bug needs a non-empty report"),
            },
            DecisionKind::Edit => match &self.edits {
                Some(e) if !e.is_empty() => Ok(()),
                _ => bad("edit needs at least one file edit"),
            },
            DecisionKind::Finish => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReasonerError {
    #[error("malformed decision: {0}")]
    Malformed(String),
    #[error("reasoner transport: {0}")]
    Transport(String),
    #[error("reasoner configuration: {0}")]
    Config(String),
}

/// One item of a reasoner context.
#[derive(Debug, Clone, PartialEq)]
pub enum ContextEntry {
    Text { label: String, text: String },
    Image { label: String, image: RasterImage },
}

impl ContextEntry {
    pub fn text(label: impl Into<String>, text: impl Into<String>) -> Self {
        ContextEntry::Text {
            label: label.into(),
            text: text.into(),
        }
    }

    pub fn image(label: impl Into<String>, image: RasterImage) -> Self {
        ContextEntry::Image {
            label: label.into(),
            image,
        }
    }

    pub fn label(&self) -> &str {
        match self {
            ContextEntry::Text { label, .. } | ContextEntry::Image { label, .. } => label,
        }
    }

    pub fn is_image(&self) -> bool {
        matches!(self, ContextEntry::Image { .. })
    }
}

/// Everything a reasoner sees for one call.
#[derive(Debug, Clone, PartialEq)]
pub struct Context {
    pub role: Role,
    pub entries: Vec<ContextEntry>,
    /// Operator history entries included (0 for other roles).
    pub history_len: usize,
}

impl Context {
    pub fn new(role: Role) -> Self {
        Self {
            role,
            entries: Vec::new(),
            history_len: 0,
        }
    }

    pub fn push(&mut self, entry: ContextEntry) {
        self.entries.push(entry);
    }

    /// Text entries as `label:` headed blocks; images appear as
    /// `[image label WxH]` placeholders.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        for e in &self.entries {
            match e {
                ContextEntry::Text { label, text } => {
                    out.push_str(label);
                    out.push_str(":\n");
                    out.push_str(text);
                    if !text.ends_with('\n') {
                        out.push('\n');
                    }
                }
                ContextEntry::Image { label, image } => {
                    out.push_str(&format!("[image {label} {}x{}]\n", image.width(), image.height()));
                }
            }
        }
        out
    }

    pub fn image_count(&self) -> usize {
        self.entries.iter().filter(|e| e.is_image()).count()
    }

    /// Trace-friendly summary: labels, image digests, counts.
    pub fn audit(&self) -> serde_json::Value {
        let entries: Vec<serde_json::Value> = self
            .entries
            .iter()
            .map(|e| match e {
                ContextEntry::Text { label, text } => serde_json::json!({"label": label, "chars": text.len()}),
                ContextEntry::Image { label, image } => {
                    serde_json::json!({"label": label, "image": image.digest()})
                }
            })
            .collect();
        serde_json::json!({
            "entries": entries,
            "images": self.image_count(),
            "history": self.history_len,
        })
    }
}

/// A decision source for one role.
pub trait Reasoner: Send {
    fn propose(&mut self, context: &Context) -> Result<(Decision, Usage), ReasonerError>;
    /// Name used for pricing.
    fn model_name(&self) -> &str;
}
