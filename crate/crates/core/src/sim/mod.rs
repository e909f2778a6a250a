//! Deterministic event-driven GUI simulator.
//!
//! An [`AppModel`] declares pages of painted rectangles, transition rules
//! triggered by user actions, and optional injected faults. Models are
//! immutable once loaded; all runtime mutation lives in [`SimState`].

mod render;
mod state;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::driver::{ActionKind, NodeState};
use crate::ies::{normalize_name, Selector};
use crate::raster::{Bounds, Rgb};

pub use render::{render_page, render_widgets};
pub use state::{SimState, TransitionOutcome};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ModelError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("dangling reference: {0}")]
    DanglingReference(String),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("cannot read model: {0}")]
    Io(String),
}

fn default_states() -> BTreeSet<NodeState> {
    BTreeSet::from([NodeState::Visible, NodeState::Enabled])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WidgetSpec {
    pub name: String,
    pub role: String,
    pub bounds: Bounds,
    pub fill: Rgb,
    #[serde(default = "default_states")]
    pub states: BTreeSet<NodeState>,
    #[serde(default)]
    pub actions: BTreeSet<ActionKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

impl WidgetSpec {
    pub fn is_visible(&self) -> bool {
        self.states.contains(&NodeState::Visible)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageSpec {
    pub canvas: Bounds,
    pub background: Rgb,
    #[serde(default)]
    pub widgets: Vec<WidgetSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trigger {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub action: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Effect {
    Navigate(String),
    SetText {
        #[serde(flatten)]
        target: Selector,
        text: String,
    },
    SetFill {
        #[serde(flatten)]
        target: Selector,
        rgb: Rgb,
    },
    RemoveWidget(Selector),
    AddState {
        #[serde(flatten)]
        target: Selector,
        state: NodeState,
    },
    AppendLog(String),
}

impl Effect {
    fn target(&self) -> Option<&Selector> {
        match self {
            Effect::SetText { target, .. }
            | Effect::SetFill { target, .. }
            | Effect::AddState { target, .. }
            | Effect::RemoveWidget(target) => Some(target),
            Effect::Navigate(_) | Effect::AppendLog(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRule {
    pub on: Trigger,
    pub effects: Vec<Effect>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultSpec {
    WrongFill {
        #[serde(flatten)]
        target: Selector,
        rgb: Rgb,
    },
    MissingWidget(Selector),
    DeadTransition(usize),
    OverlapShift {
        #[serde(flatten)]
        target: Selector,
        dx: i32,
        dy: i32,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppModel {
    pub initial_page: String,
    pub pages: BTreeMap<String, PageSpec>,
    #[serde(default)]
    pub transitions: Vec<TransitionRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crash_on_start: Option<String>,
    #[serde(default, skip_serializing_if = "is_zero_delay")]
    pub start_delay: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub faults: Vec<FaultSpec>,
}

fn is_zero_delay(d: &f64) -> bool {
    *d == 0.0
}

/// Parses and validates a model document (JSON).
pub fn load_model(document: &str) -> Result<AppModel, ModelError> {
    let model: AppModel =
        serde_json::from_str(document).map_err(|e| ModelError::Syntax(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn load_model_file(path: impl AsRef<Path>) -> Result<AppModel, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
    load_model(&text)
}

/// Selector match against a widget list: exact name (and role) first, then
/// normalized name; `nth` indexes whichever pass produced matches.
pub(crate) fn select_widget(widgets: &[WidgetSpec], sel: &Selector) -> Option<usize> {
    let role_ok = |w: &WidgetSpec| sel.role.as_ref().is_none_or(|r| *r == w.role);
    let exact: Vec<usize> = widgets
        .iter()
        .enumerate()
        .filter(|(_, w)| w.name == sel.name && role_ok(w))
        .map(|(i, _)| i)
        .collect();
    if let Some(&i) = exact.get(sel.nth) {
        return Some(i);
    }
    let wanted = normalize_name(&sel.name);
    widgets
        .iter()
        .enumerate()
        .filter(|(_, w)| normalize_name(&w.name) == wanted && role_ok(w))
        .map(|(i, _)| i)
        .nth(sel.nth)
}

impl AppModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn initial(&self) -> &PageSpec {
        &self.pages[&self.initial_page]
    }

    fn resolvable_anywhere(&self, sel: &Selector) -> bool {
        self.pages
            .values()
            .any(|p| select_widget(&p.widgets, sel).is_some())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.pages.contains_key(&self.initial_page) {
            return Err(ModelError::DanglingReference(format!(
                "initial page `{}` does not exist",
                self.initial_page
            )));
        }
        if !self.start_delay.is_finite() || self.start_delay < 0.0 {
            return Err(ModelError::Invalid("start_delay must be a non-negative number".into()));
        }
        for (id, page) in &self.pages {
            let mut names = BTreeSet::new();
            for w in &page.widgets {
                if !names.insert(w.name.as_str()) {
                    return Err(ModelError::Invalid(format!(
                        "widget `{}` appears twice on page `{id}`",
                        w.name
                    )));
                }
                if !page.canvas.contains(&w.bounds) {
                    return Err(ModelError::Invalid(format!(
                        "widget `{}` on page `{id}` lies outside the canvas",
                        w.name
                    )));
                }
            }
        }
        for (i, rule) in self.transitions.iter().enumerate() {
            let trigger = Selector {
                role: rule.on.role.clone(),
                name: rule.on.name.clone(),
                nth: 0,
            };
            if !self.resolvable_anywhere(&trigger) {
                return Err(ModelError::DanglingReference(format!(
                    "transition {i} triggers on unknown widget {trigger}"
                )));
            }
            for effect in &rule.effects {
                if let Effect::Navigate(page) = effect {
                    if !self.pages.contains_key(page) {
                        return Err(ModelError::DanglingReference(format!(
                            "transition {i} navigates to unknown page `{page}`"
                        )));
                    }
                }
                if let Some(sel) = effect.target() {
                    if !self.resolvable_anywhere(sel) {
                        return Err(ModelError::DanglingReference(format!(
                            "transition {i} targets unknown widget {sel}"
                        )));
                    }
                }
            }
        }
        for fault in &self.faults {
            match fault {
                FaultSpec::WrongFill { target, .. }
                | FaultSpec::MissingWidget(target)
                | FaultSpec::OverlapShift { target, .. } => {
                    if !self.resolvable_anywhere(target) {
                        return Err(ModelError::DanglingReference(format!(
                            "fault targets unknown widget {target}"
                        )));
                    }
                }
                FaultSpec::DeadTransition(idx) => {
                    if *idx >= self.transitions.len() {
                        return Err(ModelError::DanglingReference(format!(
                            "dead_transition refers to rule {idx} of {}",
                            self.transitions.len()
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Page widgets after applying the model's faults.
    pub(crate) fn faulted_pages(&self) -> BTreeMap<String, Vec<WidgetSpec>> {
        let mut pages: BTreeMap<String, Vec<WidgetSpec>> = self
            .pages
            .iter()
            .map(|(id, p)| (id.clone(), p.widgets.clone()))
            .collect();
        for fault in &self.faults {
            for (id, widgets) in pages.iter_mut() {
                let canvas = self.pages[id].canvas;
                match fault {
                    FaultSpec::WrongFill { target, rgb } => {
                        if let Some(i) = select_widget(widgets, target) {
                            widgets[i].fill = *rgb;
                        }
                    }
                    FaultSpec::MissingWidget(target) => {
                        if let Some(i) = select_widget(widgets, target) {
                            widgets.remove(i);
                        }
                    }
                    FaultSpec::OverlapShift { target, dx, dy } => {
                        if let Some(i) = select_widget(widgets, target) {
                            let b = &mut widgets[i].bounds;
                            b.x = shift_within(b.x, b.w, *dx, canvas.x, canvas.right());
                            b.y = shift_within(b.y, b.h, *dy, canvas.y, canvas.bottom());
                        }
                    }
                    FaultSpec::DeadTransition(_) => {}
                }
            }
        }
        pages
    }

    pub(crate) fn dead_rules(&self) -> BTreeSet<usize> {
        self.faults
            .iter()
            .filter_map(|f| match f {
                FaultSpec::DeadTransition(i) => Some(*i),
                _ => None,
            })
            .collect()
    }
}

fn shift_within(pos: u32, extent: u32, delta: i32, lo: u32, hi: u32) -> u32 {
    let max = i64::from(hi.saturating_sub(extent).max(lo));
    (i64::from(pos) + i64::from(delta)).clamp(i64::from(lo), max) as u32
}

#[cfg(test)]
pub(crate) mod fixtures {
    /// Two pages: `main` with Settings/Save/Search, `settings` with one toggle.
    pub const TWO_PAGE: &str = r#"{
      "initial_page": "main",
      "pages": {
        "main": {
          "canvas": [0, 0, 200, 100],
          "background": [240, 240, 240],
          "widgets": [
            {"name": "Settings", "role": "button", "bounds": [0, 0, 50, 50], "fill": [255, 0, 0], "actions": ["click"]},
            {"name": "Save", "role": "button", "bounds": [60, 0, 50, 30], "fill": [0, 122, 255], "actions": ["click"]},
            {"name": "Search", "role": "text", "bounds": [120, 60, 70, 30], "fill": [255, 255, 255], "actions": ["set_text", "focus"]}
          ]
        },
        "settings": {
          "canvas": [0, 0, 200, 100],
          "background": [30, 30, 30],
          "widgets": [
            {"name": "Dark mode", "role": "check_box", "bounds": [10, 10, 40, 20], "fill": [0, 200, 0], "actions": ["click"]}
          ]
        }
      },
      "transitions": [
        {"on": {"name": "Settings", "action": "click"}, "effects": [{"navigate": "settings"}]},
        {"on": {"name": "Search", "action": "set_text", "payload": "abc"},
         "effects": [{"set_fill": {"name": "Save", "rgb": [0, 0, 0]}}, {"append_log": "searched"}]}
      ]
    }"#;
}
