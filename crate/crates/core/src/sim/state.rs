use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{select_widget, AppModel, Effect, PageSpec, WidgetSpec};
use crate::driver::ActionKind;
use crate::ies::normalize_name;
use crate::raster::RasterImage;

/// Result of dispatching one action to the transition table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionOutcome {
    Applied { rule: usize },
    NoEffect,
}

/// Mutable runtime state of one simulated application.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimState {
    pub current_page: String,
    pub pages: BTreeMap<String, Vec<WidgetSpec>>,
    pub logs: Vec<String>,
    dead_rules: BTreeSet<usize>,
}

impl SimState {
    /// Start-of-session state: faults applied, initial page showing.
    pub fn initial(model: &AppModel) -> Self {
        Self {
            current_page: model.initial_page.clone(),
            pages: model.faulted_pages(),
            logs: Vec::new(),
            dead_rules: model.dead_rules(),
        }
    }

    pub fn page_spec<'m>(&self, model: &'m AppModel) -> &'m PageSpec {
        &model.pages[&self.current_page]
    }

    pub fn widgets(&self) -> &[WidgetSpec] {
        &self.pages[&self.current_page]
    }

    /// Runs the first rule whose trigger matches `widget` on the current page.
    /// A matching rule disabled by a `dead_transition` fault yields `NoEffect`.
    pub fn apply_action(
        &self,
        model: &AppModel,
        widget: &WidgetSpec,
        action: ActionKind,
        payload: Option<&str>,
    ) -> (SimState, TransitionOutcome) {
        let matched = model.transitions.iter().position(|rule| {
            let on = &rule.on;
            let name_ok = on.name == widget.name || normalize_name(&on.name) == normalize_name(&widget.name);
            name_ok
                && on.role.as_ref().is_none_or(|r| *r == widget.role)
                && on.action == action
                && on.payload.as_deref().is_none_or(|p| Some(p) == payload)
        });
        let Some(rule) = matched else {
            return (self.clone(), TransitionOutcome::NoEffect);
        };
        if self.dead_rules.contains(&rule) {
            return (self.clone(), TransitionOutcome::NoEffect);
        }
        let mut next = self.clone();
        for effect in &model.transitions[rule].effects {
            next.apply_effect(effect);
        }
        (next, TransitionOutcome::Applied { rule })
    }

    fn apply_effect(&mut self, effect: &Effect) {
        if let Effect::Navigate(page) = effect {
            self.current_page = page.clone();
            return;
        }
        if let Effect::AppendLog(line) = effect {
            self.logs.push(line.clone());
            return;
        }
        let widgets = self.pages.get_mut(&self.current_page).expect("current page exists");
        let target = effect.target().expect("widget effect");
        let Some(i) = select_widget(widgets, target) else {
            self.logs
                .push(format!("warning: effect target {target} not on page `{}`", self.current_page));
            return;
        };
        match effect {
            Effect::SetText { text, .. } => widgets[i].text = Some(text.clone()),
            Effect::SetFill { rgb, .. } => widgets[i].fill = *rgb,
            Effect::RemoveWidget(_) => {
                widgets.remove(i);
            }
            Effect::AddState { state, .. } => {
                widgets[i].states.insert(*state);
            }
            Effect::Navigate(_) | Effect::AppendLog(_) => unreachable!(),
        }
    }

    pub fn render(&self, model: &AppModel) -> RasterImage {
        super::render_widgets(self.page_spec(model), self.widgets())
    }
}
