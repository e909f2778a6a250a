use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use super::{
    AccessibilityNode, Action, ActionKind, BackendError, BackendKind, Clock, DriverSession,
    GuiBackend, NodeState,
};
use crate::raster::{Bounds, RasterImage};
use crate::sim::{AppModel, SimState};

/// Simulated application session. The model is shared read-only; all
/// mutation lives in the owned [`SimState`].
pub struct SimBackend {
    model: Arc<AppModel>,
    state: SimState,
    log_cursor: usize,
}

impl SimBackend {
    pub fn new(model: Arc<AppModel>) -> Self {
        let state = SimState::initial(&model);
        Self {
            model,
            state,
            log_cursor: 0,
        }
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    fn node_id(page: &str, name: &str) -> String {
        format!("{page}/{name}")
    }

    pub fn tree(&self) -> AccessibilityNode {
        let page = self.state.page_spec(&self.model);
        let page_id = &self.state.current_page;
        let children = self
            .state
            .widgets()
            .iter()
            .map(|w| AccessibilityNode {
                node_id: Self::node_id(page_id, &w.name),
                role: w.role.clone(),
                name: w.name.clone(),
                bounds: w.bounds,
                states: w.states.clone(),
                actions: w.actions.clone(),
                text: w.text.clone(),
                children: Vec::new(),
            })
            .collect();
        AccessibilityNode {
            node_id: format!("window:{page_id}"),
            role: "window".into(),
            name: page_id.clone(),
            bounds: Bounds {
                x: 0,
                y: 0,
                ..page.canvas
            },
            states: BTreeSet::from([NodeState::Visible, NodeState::Enabled]),
            actions: BTreeSet::new(),
            text: None,
            children,
        }
    }
}

impl GuiBackend for SimBackend {
    fn snapshot(&mut self) -> Result<AccessibilityNode, BackendError> {
        Ok(self.tree())
    }

    fn perform(&mut self, node: &AccessibilityNode, action: &Action) -> Result<(), BackendError> {
        let page = self.state.current_page.clone();
        let Some(idx) = self
            .state
            .widgets()
            .iter()
            .position(|w| Self::node_id(&page, &w.name) == node.node_id)
        else {
            return Err(BackendError::Other(format!("no widget behind node {}", node.node_id)));
        };
        // Intrinsic widget behaviour precedes the transition table.
        let mut state = self.state.clone();
        {
            let w = &mut state.pages.get_mut(&page).expect("page").get_mut(idx).expect("widget");
            match action {
                Action::SetText(t) => w.text = Some(t.clone()),
                Action::Select(opt) => {
                    w.text = Some(opt.clone());
                    w.states.insert(NodeState::Selected);
                }
                Action::Click => {
                    if w.actions.contains(&ActionKind::Focus) {
                        w.states.insert(NodeState::Focused);
                    }
                }
            }
        }
        let widget = state.widgets()[idx].clone();
        let (next, _) = state.apply_action(&self.model, &widget, action.kind(), action.payload());
        self.state = next;
        Ok(())
    }

    fn screenshot(&mut self) -> Result<RasterImage, BackendError> {
        Ok(self.state.render(&self.model))
    }

    fn is_alive(&mut self) -> bool {
        true
    }

    fn take_logs(&mut self) -> Vec<String> {
        let out = self.state.logs[self.log_cursor..].to_vec();
        self.log_cursor = self.state.logs.len();
        out
    }

    fn shutdown(&mut self) {}
}

pub(super) fn launch(model: Arc<AppModel>, clock: &dyn Clock, timeout: Duration) -> DriverSession {
    let started = clock.now();
    if timeout.is_zero() {
        return DriverSession::failed(BackendKind::Sim, vec!["error: launch timeout must be positive".into()], 0.0);
    }
    if let Some(err) = &model.crash_on_start {
        return DriverSession::failed(
            BackendKind::Sim,
            vec![format!("error: application crashed on start: {err}")],
            0.0,
        );
    }
    let delay = Duration::from_secs_f64(model.start_delay);
    if delay >= timeout {
        clock.sleep(timeout);
        let elapsed = (clock.now() - started).as_secs_f64();
        return DriverSession::failed(
            BackendKind::Sim,
            vec![format!(
                "error: no accessibility root within {:.3}s",
                timeout.as_secs_f64()
            )],
            elapsed,
        );
    }
    clock.sleep(delay);
    let elapsed = (clock.now() - started).as_secs_f64();
    let start_line = format!("started on page `{}`", model.initial_page);
    DriverSession::running(BackendKind::Sim, Box::new(SimBackend::new(model)), vec![start_line], elapsed)
}
