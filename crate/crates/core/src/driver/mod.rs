//! Uniform runtime access to a GUI program: launch, accessibility-tree
//! snapshots, element lookup, interaction, screenshots.
//!
//! Two backends sit behind [`GuiBackend`]: the in-process simulator and an
//! adapter for an accessibility bus driving a real subprocess. The latter
//! is only available when a [`AccessibilityBus`] implementation is
//! registered on the [`Launcher`].

mod atspi;
mod clock;
mod sim_backend;
pub mod supervisor;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::ies::{normalize_name, Selector};
use crate::raster::{Bounds, RasterImage};
use crate::sim::AppModel;

pub use atspi::{AccessibilityBus, BusError};
pub use clock::{Clock, ManualClock, SystemClock};
pub use sim_backend::SimBackend;

/// Launch timeout used when none is configured.
pub const DEFAULT_LAUNCH_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeState {
    Visible,
    Enabled,
    Focused,
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Click,
    Focus,
    SetText,
    Select,
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ActionKind::Click => "click",
            ActionKind::Focus => "focus",
            ActionKind::SetText => "set_text",
            ActionKind::Select => "select",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccessibilityNode {
    pub node_id: String,
    pub role: String,
    pub name: String,
    pub bounds: Bounds,
    pub states: BTreeSet<NodeState>,
    pub actions: BTreeSet<ActionKind>,
    /// Current text content for editable or selectable widgets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default)]
    pub children: Vec<AccessibilityNode>,
}

impl AccessibilityNode {
    /// Depth-first pre-order iterator, root first.
    pub fn iter(&self) -> impl Iterator<Item = &AccessibilityNode> {
        let mut stack = vec![self];
        std::iter::from_fn(move || {
            let node = stack.pop()?;
            stack.extend(node.children.iter().rev());
            Some(node)
        })
    }

    pub fn find_id(&self, node_id: &str) -> Option<&AccessibilityNode> {
        self.iter().find(|n| n.node_id == node_id)
    }

    pub fn is_visible(&self) -> bool {
        self.states.contains(&NodeState::Visible)
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }
}

/// An interaction to dispatch on a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Click,
    SetText(String),
    Select(String),
}

impl Action {
    pub fn kind(&self) -> ActionKind {
        match self {
            Action::Click => ActionKind::Click,
            Action::SetText(_) => ActionKind::SetText,
            Action::Select(_) => ActionKind::Select,
        }
    }

    pub fn payload(&self) -> Option<&str> {
        match self {
            Action::Click => None,
            Action::SetText(t) | Action::Select(t) => Some(t),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    ActionUnavailable,
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActOutcome {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum DriverError {
    #[error("session is not running")]
    SessionDead,
    #[error("node `{0}` is not in the current tree")]
    StaleNode(String),
    #[error("no element matches {0}")]
    NotFound(Selector),
    #[error("backend error: {0}")]
    Backend(String),
}

/// Errors a backend reports to its session.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("application is gone")]
    Dead,
    #[error("{0}")]
    Other(String),
}

impl From<BackendError> for DriverError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Dead => DriverError::SessionDead,
            BackendError::Other(msg) => DriverError::Backend(msg),
        }
    }
}

/// What a session needs from a concrete GUI runtime. Implementations are
/// only invoked while the session is running.
pub trait GuiBackend: Send {
    fn snapshot(&mut self) -> Result<AccessibilityNode, BackendError>;
    /// Performs an already-admitted action on a node of the current tree.
    fn perform(&mut self, node: &AccessibilityNode, action: &Action) -> Result<(), BackendError>;
    fn screenshot(&mut self) -> Result<RasterImage, BackendError>;
    fn is_alive(&mut self) -> bool;
    /// Log lines produced since the previous call.
    fn take_logs(&mut self) -> Vec<String>;
    fn shutdown(&mut self);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Sim,
    AccessibilityBus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    FailedToStart,
    Exited,
}

/// One launched application. Confined to a single worker at a time.
pub struct DriverSession {
    backend_kind: BackendKind,
    status: SessionStatus,
    logs: Vec<String>,
    launch_elapsed: f64,
    inner: Option<Box<dyn GuiBackend>>,
}

impl fmt::Debug for DriverSession {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriverSession")
            .field("backend", &self.backend_kind)
            .field("status", &self.status)
            .field("logs", &self.logs.len())
            .field("launch_elapsed", &self.launch_elapsed)
            .finish()
    }
}

impl DriverSession {
    pub fn running(
        backend_kind: BackendKind,
        backend: Box<dyn GuiBackend>,
        logs: Vec<String>,
        launch_elapsed: f64,
    ) -> Self {
        Self {
            backend_kind,
            status: SessionStatus::Running,
            logs,
            launch_elapsed,
            inner: Some(backend),
        }
    }

    pub fn failed(backend_kind: BackendKind, logs: Vec<String>, launch_elapsed: f64) -> Self {
        Self {
            backend_kind,
            status: SessionStatus::FailedToStart,
            logs,
            launch_elapsed,
            inner: None,
        }
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend_kind
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    pub fn launch_elapsed(&self) -> f64 {
        self.launch_elapsed
    }

    pub fn logs(&self) -> &[String] {
        &self.logs
    }

    pub fn log_tail(&self, n: usize) -> &[String] {
        &self.logs[self.logs.len().saturating_sub(n)..]
    }

    fn sync_logs(&mut self) {
        if let Some(b) = self.inner.as_mut() {
            self.logs.extend(b.take_logs());
        }
    }

    fn backend(&mut self) -> Result<&mut Box<dyn GuiBackend>, DriverError> {
        if self.status != SessionStatus::Running {
            return Err(DriverError::SessionDead);
        }
        self.sync_logs();
        let alive = self.inner.as_mut().is_some_and(|b| b.is_alive());
        if !alive {
            self.mark_exited();
            return Err(DriverError::SessionDead);
        }
        Ok(self.inner.as_mut().expect("running session has a backend"))
    }

    fn mark_exited(&mut self) {
        self.sync_logs();
        if let Some(mut b) = self.inner.take() {
            b.shutdown();
            self.logs.extend(b.take_logs());
        }
        if self.status == SessionStatus::Running {
            self.status = SessionStatus::Exited;
        }
    }

    fn guard<T>(&mut self, r: Result<T, BackendError>) -> Result<T, DriverError> {
        if matches!(r, Err(BackendError::Dead)) {
            self.mark_exited();
        }
        self.sync_logs();
        r.map_err(DriverError::from)
    }

    pub fn snapshot_tree(&mut self) -> Result<AccessibilityNode, DriverError> {
        let r = self.backend()?.snapshot();
        self.guard(r)
    }

    /// Dispatches `action` on `node`, which must still be in the current tree.
    /// Rejected actions never reach the backend.
    pub fn act(&mut self, node: &AccessibilityNode, action: &Action) -> Result<ActOutcome, DriverError> {
        let tree = self.snapshot_tree()?;
        let Some(live) = tree.find_id(&node.node_id) else {
            return Err(DriverError::StaleNode(node.node_id.clone()));
        };
        if !live.actions.contains(&action.kind()) {
            return Ok(ActOutcome::Rejected(RejectReason::ActionUnavailable));
        }
        if !live.states.contains(&NodeState::Enabled) {
            return Ok(ActOutcome::Rejected(RejectReason::Disabled));
        }
        let live = live.clone();
        let r = self.backend()?.perform(&live, action);
        self.guard(r).map(|()| ActOutcome::Accepted)
    }

    pub fn screenshot(&mut self) -> Result<RasterImage, DriverError> {
        let r = self.backend()?.screenshot();
        self.guard(r)
    }

    /// Idempotent. Failed sessions keep their `FailedToStart` status.
    pub fn terminate(&mut self) {
        self.mark_exited();
    }
}

impl Drop for DriverSession {
    fn drop(&mut self) {
        self.terminate();
    }
}

/// A successful [`find`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Found {
    pub node: AccessibilityNode,
    pub fallback_used: bool,
}

/// Returns the `nth` pre-order match for `sel`. Exact names are tried first;
/// only if they yield fewer than `nth + 1` matches are normalized names
/// (trimmed, whitespace-collapsed, case-folded) considered.
pub fn find(tree: &AccessibilityNode, sel: &Selector) -> Result<Found, DriverError> {
    let role_ok = |n: &AccessibilityNode| sel.role.as_ref().is_none_or(|r| *r == n.role);
    if let Some(n) = tree
        .iter()
        .filter(|n| n.name == sel.name && role_ok(n))
        .nth(sel.nth)
    {
        return Ok(Found {
            node: n.clone(),
            fallback_used: false,
        });
    }
    let wanted = normalize_name(&sel.name);
    tree.iter()
        .filter(|n| normalize_name(&n.name) == wanted && role_ok(n))
        .nth(sel.nth)
        .map(|n| Found {
            node: n.clone(),
            fallback_used: true,
        })
        .ok_or_else(|| DriverError::NotFound(sel.clone()))
}

/// How to start an application.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LaunchDescriptor {
    Sim {
        model_path: PathBuf,
    },
    Atspi {
        command: Vec<String>,
        #[serde(default)]
        display_env: BTreeMap<String, String>,
    },
}

impl LaunchDescriptor {
    /// Makes a relative `model_path` relative to `base`.
    pub fn relative_to(mut self, base: &Path) -> Self {
        if let LaunchDescriptor::Sim { model_path } = &mut self {
            if model_path.is_relative() {
                *model_path = base.join(&*model_path);
            }
        }
        self
    }
}

/// Starts sessions. Cheap to clone and share across workers.
#[derive(Clone)]
pub struct Launcher {
    clock: Arc<dyn Clock>,
    bus: Option<Arc<dyn AccessibilityBus>>,
    working_dir: Option<PathBuf>,
}

impl Default for Launcher {
    fn default() -> Self {
        Self::new()
    }
}

impl Launcher {
    pub fn new() -> Self {
        Self {
            clock: Arc::new(SystemClock::new()),
            bus: None,
            working_dir: None,
        }
    }

    pub fn with_clock(mut self, clock: Arc<dyn Clock>) -> Self {
        self.clock = clock;
        self
    }

    /// Enables the accessibility-bus backend.
    pub fn with_bus(mut self, bus: Arc<dyn AccessibilityBus>) -> Self {
        self.bus = Some(bus);
        self
    }

    /// Working directory for subprocess backends.
    pub fn with_working_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.working_dir = Some(dir.into());
        self
    }

    pub fn supports_bus(&self) -> bool {
        self.bus.is_some()
    }

    pub fn launch(&self, desc: &LaunchDescriptor, timeout: Duration) -> DriverSession {
        match desc {
            LaunchDescriptor::Sim { model_path } => {
                match crate::sim::load_model_file(model_path) {
                    Ok(model) => self.launch_model(Arc::new(model), timeout),
                    Err(e) => DriverSession::failed(
                        BackendKind::Sim,
                        vec![format!("error: failed to load model: {e}")],
                        0.0,
                    ),
                }
            }
            LaunchDescriptor::Atspi {
                command,
                display_env,
            } => atspi::launch(
                self.bus.clone(),
                self.clock.as_ref(),
                command,
                display_env,
                self.working_dir.as_deref(),
                timeout,
            ),
        }
    }

    /// Starts a simulated application from an in-memory model.
    pub fn launch_model(&self, model: Arc<AppModel>, timeout: Duration) -> DriverSession {
        sim_backend::launch(model, self.clock.as_ref(), timeout)
    }
}

/// One line per node, indented by depth: `role "name" [x,y,w,h] states`.
pub fn describe_tree(tree: &AccessibilityNode) -> String {
    fn walk(n: &AccessibilityNode, depth: usize, out: &mut String) {
        let states: Vec<_> = n
            .states
            .iter()
            .map(|s| serde_json::to_value(s).unwrap().as_str().unwrap().to_owned())
            .collect();
        out.push_str(&format!(
            "{}{} {:?} [{},{},{},{}] {}",
            "  ".repeat(depth),
            n.role,
            n.name,
            n.bounds.x,
            n.bounds.y,
            n.bounds.w,
            n.bounds.h,
            states.join(",")
        ));
        if let Some(t) = &n.text {
            out.push_str(&format!(" text={t:?}"));
        }
        out.push('\n');
        for c in &n.children {
            walk(c, depth + 1, out);
        }
    }
    let mut out = String::new();
    walk(tree, 0, &mut out);
    out
}
