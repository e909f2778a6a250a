//! GUI operator: launches the candidate in a sandbox copy of the workspace,
//! observes and interacts for a bounded number of steps, and reports the
//! first defect it is told to report.

use std::path::Path;
use std::time::Duration;

use serde_json::json;

use super::planner::Subtask;
use super::{Context, ContextEntry, DebugTrace, DecisionKind, InteractAction, Reasoner};
use crate::driver::{
    find, AccessibilityNode, ActOutcome, Action, DriverError, DriverSession, LaunchDescriptor, Launcher, NodeState,
    SessionStatus,
};
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugKind {
    Reported,
    StepLimit,
    FailedToStart,
    Crashed,
}

impl BugKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BugKind::Reported => "reported",
            BugKind::StepLimit => "step_limit",
            BugKind::FailedToStart => "failed_to_start",
            BugKind::Crashed => "crashed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BugReport {
    pub kind: BugKind,
    pub description: String,
    /// Frame on screen when the defect was detected.
    pub screenshot: Option<RasterImage>,
    pub logs: String,
    pub hint: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorResult {
    Ok { summary: String },
    Bug(BugReport),
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq)]
struct HistoryEntry {
    observation: String,
    screenshot: Option<RasterImage>,
    action: String,
}

const LOG_TAIL: usize = 10;

fn state_name(s: NodeState) -> &'static str {
    match s {
        NodeState::Visible => "visible",
        NodeState::Enabled => "enabled",
        NodeState::Focused => "focused",
        NodeState::Selected => "selected",
    }
}

/// Observation text. With a screenshot every widget line carries its
/// bounds, states and perceived color; without one it is a role/name
/// outline.
pub fn describe_observation(tree: &AccessibilityNode, shot: Option<&RasterImage>, logs: &[String]) -> String {
    let mut out = format!("page: {}\nwidgets:\n", tree.name);
    for n in tree.iter().skip(1) {
        out.push_str(&format!("- {} \"{}\"", n.role, n.name));
        if let Some(img) = shot {
            let b = n.bounds;
            let states: Vec<&str> = n.states.iter().map(|s| state_name(*s)).collect();
            out.push_str(&format!(" [{},{},{},{}] {}", b.x, b.y, b.w, b.h, states.join(",")));
            if let Some(c) = img.crop(&b).and_then(|r| r.dominant_color()) {
                out.push_str(&format!(" color {}", c.to_hex()));
            }
            if let Some(t) = &n.text {
                out.push_str(&format!(" text {t:?}"));
            }
        }
        out.push('\n');
    }
    out.push_str("logs:\n");
    for l in logs {
        out.push_str(&format!("- {l}\n"));
    }
    out
}

/// Copies `src` into `dst`, skipping version-control directories.
pub(crate) fn copy_tree(src: &Path, dst: &Path) -> std::io::Result<()> {
    for entry in walkdir::WalkDir::new(src).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        let rel = entry.path().strip_prefix(src).expect("walk stays under root");
        if rel.components().any(|c| c.as_os_str() == ".git") {
            continue;
        }
        let target = dst.join(rel);
        if entry.file_type().is_dir() {
            std::fs::create_dir_all(&target)?;
        } else if entry.file_type().is_file() {
            std::fs::copy(entry.path(), &target)?;
        }
    }
    Ok(())
}

fn launch_in(sandbox: &Path, launcher: &Launcher, timeout: Duration) -> DriverSession {
    let app = sandbox.join("app.json");
    let launch = sandbox.join("launch.json");
    if app.is_file() {
        return launcher.launch(&LaunchDescriptor::Sim { model_path: app }, timeout);
    }
    let failed = |msg: String| DriverSession::failed(crate::driver::BackendKind::Sim, vec![msg], 0.0);
    if !launch.is_file() {
        return failed("error: workspace has neither app.json nor launch.json".into());
    }
    let desc = std::fs::read_to_string(&launch)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str::<LaunchDescriptor>(&t).map_err(|e| e.to_string()));
    match desc {
        Ok(d) => launcher
            .clone()
            .with_working_dir(sandbox)
            .launch(&d.relative_to(sandbox), timeout),
        Err(e) => failed(format!("error: bad launch.json: {e}")),
    }
}

pub struct Operator {
    reasoner: Box<dyn Reasoner>,
    max_steps: usize,
    history_window: usize,
    history: Vec<HistoryEntry>,
}

impl Operator {
    pub fn new(reasoner: Box<dyn Reasoner>, max_steps: usize, history_window: usize) -> Self {
        Self {
            reasoner,
            max_steps: max_steps.max(1),
            history_window,
            history: Vec::new(),
        }
    }

    /// Entries retained since the last [`Operator::clear_session`].
    pub fn memory_len(&self) -> usize {
        self.history.len()
    }

    pub fn clear_session(&mut self, trace: &mut DebugTrace) {
        self.history.clear();
        trace.record("operator", "clear_session", json!({"agent": "operator", "remaining": self.history.len()}));
    }

    fn context(&self, instruction: &str, subtask: &Subtask, observation: &str, shot: &RasterImage) -> Context {
        let mut c = Context::new(super::Role::Operator);
        c.push(ContextEntry::text("instruction", instruction));
        c.push(ContextEntry::text("subtask", &subtask.description));
        let start = self.history.len().saturating_sub(self.history_window);
        for (i, h) in self.history[start..].iter().enumerate() {
            let n = start + i + 1;
            c.push(ContextEntry::text(
                format!("history {n}"),
                format!("{}action: {}", h.observation, h.action),
            ));
            if let Some(img) = &h.screenshot {
                c.push(ContextEntry::image(format!("history {n} screenshot"), img.clone()));
            }
        }
        c.history_len = self.history.len() - start;
        c.push(ContextEntry::text("observation", observation));
        c.push(ContextEntry::image("current screenshot", shot.clone()));
        c
    }

    fn env<T>(
        trace: &mut DebugTrace,
        step: usize,
        op: &str,
        session: &mut DriverSession,
        f: impl FnOnce(&mut DriverSession) -> Result<T, DriverError>,
    ) -> Result<T, DriverError> {
        trace.record("operator", "env_call", json!({"op": op, "step": step}));
        f(session)
    }

    fn end(session: &mut DriverSession, trace: &mut DebugTrace, why: &str) {
        session.terminate();
        trace.record("operator", "terminate", json!({"reason": why}));
    }

    /// Inspects the workspace's application. Sessions always end before
    /// returning.
    pub fn operate(
        &mut self,
        subtask: &Subtask,
        instruction: &str,
        workspace: &Path,
        launcher: &Launcher,
        timeout: Duration,
        trace: &mut DebugTrace,
    ) -> OperatorResult {
        let sandbox = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return OperatorResult::Error { message: format!("sandbox: {e}") },
        };
        if let Err(e) = copy_tree(workspace, sandbox.path()) {
            return OperatorResult::Error { message: format!("sandbox copy: {e}") };
        }
        trace.record("operator", "env_call", json!({"op": "launch", "step": 0}));
        let mut session = launch_in(sandbox.path(), launcher, timeout);
        if session.status() != SessionStatus::Running {
            let logs = session.logs().join("\n");
            trace.record("operator", "launch_failed", json!({"logs": logs}));
            return OperatorResult::Bug(BugReport {
                kind: BugKind::FailedToStart,
                description: format!("application failed to start: {}", session.log_tail(3).join(" | ")),
                screenshot: None,
                logs,
                hint: None,
            });
        }

        let mut last_shot: Option<RasterImage> = None;
        for step in 1..=self.max_steps {
            let observed = Self::env(trace, step, "snapshot", &mut session, |s| s.snapshot_tree()).and_then(|tree| {
                Self::env(trace, step, "screenshot", &mut session, |s| s.screenshot()).map(|shot| (tree, shot))
            });
            let (tree, shot) = match observed {
                Ok(o) => o,
                Err(e) => {
                    Self::end(&mut session, trace, "application stopped responding");
                    return OperatorResult::Bug(BugReport {
                        kind: BugKind::Crashed,
                        description: format!("application stopped during inspection: {e}"),
                        screenshot: last_shot,
                        logs: session.logs().join("\n"),
                        hint: None,
                    });
                }
            };
            let logs = session.log_tail(LOG_TAIL).to_vec();
            let observation = describe_observation(&tree, Some(&shot), &logs);
            let ctx = self.context(instruction, subtask, &observation, &shot);
            trace.record("operator", "step", json!({"step": step, "history_len": ctx.history_len}));
            let proposed = self.reasoner.propose(&ctx);
            let (decision, usage) = match proposed {
                Ok(d) => d,
                Err(e) => {
                    Self::end(&mut session, trace, "reasoner error");
                    return OperatorResult::Error { message: e.to_string() };
                }
            };
            trace.record(
                "operator",
                "reasoner_call",
                json!({"role": "operator", "model": self.reasoner.model_name(), "usage": usage, "context": ctx.audit()}),
            );
            trace.record("operator", "decision", json!({"step": step, "decision": decision}));
            if let Err(e) = decision.validate() {
                Self::end(&mut session, trace, "malformed decision");
                return OperatorResult::Error { message: e.to_string() };
            }
            match decision.kind {
                DecisionKind::ReportBug => {
                    Self::end(&mut session, trace, "bug reported");
                    let description = decision.report.clone().unwrap_or_default();
                    self.history.push(HistoryEntry {
                        observation,
                        screenshot: Some(shot.clone()),
                        action: format!("report_bug {description:?}"),
                    });
                    return OperatorResult::Bug(BugReport {
                        kind: BugKind::Reported,
                        description,
                        screenshot: Some(shot),
                        logs: logs.join("\n"),
                        hint: decision.target.map(|t| t.name),
                    });
                }
                DecisionKind::Finish => {
                    Self::end(&mut session, trace, "finished");
                    self.history.push(HistoryEntry {
                        observation,
                        screenshot: Some(shot),
                        action: "finish".into(),
                    });
                    return OperatorResult::Ok {
                        summary: decision.report.unwrap_or_else(|| "no defect observed".into()),
                    };
                }
                DecisionKind::Interact => {
                    let target = decision.target.clone().expect("validated");
                    let (verb, action) = match decision.action.expect("validated") {
                        InteractAction::Click => ("click", Action::Click),
                        InteractAction::InputText => {
                            ("input_text", Action::SetText(decision.payload.clone().unwrap_or_default()))
                        }
                        InteractAction::Select => ("select", Action::Select(decision.payload.clone().unwrap_or_default())),
                    };
                    let outcome = match find(&tree, &target) {
                        Err(e) => Ok(format!("failed: {e}")),
                        Ok(found) => Self::env(trace, step, "act", &mut session, |s| s.act(&found.node, &action)).map(
                            |o| match o {
                                ActOutcome::Accepted => "accepted".to_string(),
                                ActOutcome::Rejected(r) => format!("rejected: {r:?}"),
                            },
                        ),
                    };
                    let action_text = format!("{verb} \"{}\"", target.name);
                    match outcome {
                        Ok(o) => self.history.push(HistoryEntry {
                            observation,
                            screenshot: Some(shot.clone()),
                            action: format!("{action_text} -> {o}\n"),
                        }),
                        Err(e) => {
                            Self::end(&mut session, trace, "application exited");
                            return OperatorResult::Bug(BugReport {
                                kind: BugKind::Crashed,
                                description: format!("application exited after {action_text}: {e}"),
                                screenshot: Some(shot),
                                logs: session.logs().join("\n"),
                                hint: Some(target.name),
                            });
                        }
                    }
                    last_shot = Some(shot);
                }
                DecisionKind::Plan | DecisionKind::Edit => {
                    Self::end(&mut session, trace, "malformed decision");
                    return OperatorResult::Error {
                        message: format!("operator cannot emit {:?}", decision.kind),
                    };
                }
            }
        }
        Self::end(&mut session, trace, "step limit");
        trace.record("operator", "step_limit", json!({"max_steps": self.max_steps}));
        OperatorResult::Bug(BugReport {
            kind: BugKind::StepLimit,
            description: format!("operator step limit ({}) reached without a verdict", self.max_steps),
            screenshot: last_shot,
            logs: session.logs().join("\n"),
            hint: None,
        })
    }

    /// Text-only check used when the GUI operator is ablated: launch status,
    /// logs and a role/name outline, judged in one reasoner call without
    /// images or interaction.
    pub fn text_check(
        &mut self,
        subtask: &Subtask,
        instruction: &str,
        workspace: &Path,
        launcher: &Launcher,
        timeout: Duration,
        trace: &mut DebugTrace,
    ) -> OperatorResult {
        let sandbox = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return OperatorResult::Error { message: format!("sandbox: {e}") },
        };
        if let Err(e) = copy_tree(workspace, sandbox.path()) {
            return OperatorResult::Error { message: format!("sandbox copy: {e}") };
        }
        trace.record("text_check", "env_call", json!({"op": "launch"}));
        let mut session = launch_in(sandbox.path(), launcher, timeout);
        if session.status() != SessionStatus::Running {
            let logs = session.logs().join("\n");
            return OperatorResult::Bug(BugReport {
                kind: BugKind::FailedToStart,
                description: format!("application failed to start: {}", session.log_tail(3).join(" | ")),
                screenshot: None,
                logs,
                hint: None,
            });
        }
        trace.record("text_check", "env_call", json!({"op": "snapshot"}));
        let tree = session.snapshot_tree();
        let logs = session.log_tail(LOG_TAIL).to_vec();
        session.terminate();
        let observation = match tree {
            Ok(t) => format!("{}status: running\n", describe_observation(&t, None, &logs)),
            Err(e) => format!("logs:\n{}\nstatus: {e}\n", logs.join("\n")),
        };
        let mut ctx = Context::new(super::Role::Operator);
        ctx.push(ContextEntry::text("instruction", instruction));
        ctx.push(ContextEntry::text("subtask", &subtask.description));
        ctx.push(ContextEntry::text("observation", observation));
        let (decision, usage) = match self.reasoner.propose(&ctx) {
            Ok(d) => d,
            Err(e) => return OperatorResult::Error { message: e.to_string() },
        };
        trace.record(
            "text_check",
            "reasoner_call",
            json!({"role": "operator", "model": self.reasoner.model_name(), "usage": usage, "context": ctx.audit()}),
        );
        trace.record("text_check", "decision", json!({"decision": decision}));
        match decision.kind {
            DecisionKind::ReportBug if decision.validate().is_ok() => OperatorResult::Bug(BugReport {
                kind: BugKind::Reported,
                description: decision.report.unwrap_or_default(),
                screenshot: None,
                logs: logs.join("\n"),
                hint: decision.target.map(|t| t.name),
            }),
            _ => OperatorResult::Ok {
                summary: "text check found no defect".into(),
            },
        }
    }
}
