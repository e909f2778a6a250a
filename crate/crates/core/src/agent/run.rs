use std::path::Path;
use std::str::FromStr;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::fixer::Fixer;
use super::operator::{Operator, OperatorResult};
use super::planner::{FeedbackEntry, PlanAction, PlannerState};
use super::{DebugTrace, Reasoner};
use crate::driver::{Launcher, DEFAULT_LAUNCH_TIMEOUT};
use crate::raster::RasterImage;

/// One reasoner per role.
pub struct Reasoners {
    pub planner: Box<dyn Reasoner>,
    pub operator: Box<dyn Reasoner>,
    pub fixer: Box<dyn Reasoner>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    None,
    /// Replace the GUI operator with a text-only check; no images anywhere.
    NoOperator,
    /// Keep the operator but withhold its screenshot from the fixer.
    NoBugScreenshot,
}

impl FromStr for Ablation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Ablation::None),
            "no-operator" => Ok(Ablation::NoOperator),
            "no-bug-screenshot" => Ok(Ablation::NoBugScreenshot),
            other => Err(format!(
                "unknown ablation `{other}` (expected none, no-operator or no-bug-screenshot)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebugConfig {
    pub planner_max: usize,
    pub operator_max: usize,
    pub history_window: usize,
    pub launch_timeout: Duration,
    pub ablation: Ablation,
}

impl Default for DebugConfig {
    fn default() -> Self {
        Self {
            planner_max: 10,
            operator_max: 5,
            history_window: 4,
            launch_timeout: DEFAULT_LAUNCH_TIMEOUT,
            ablation: Ablation::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebugOutcome {
    pub trace: DebugTrace,
    /// Planner calls made, including the terminating one.
    pub iterations: usize,
    /// The planner chose to finish rather than hitting the cap.
    pub terminated_normally: bool,
    pub reason: String,
}

/// Runs the plan / inspect / fix loop against `workspace`, editing it in
/// place.
pub fn run_debug_loop(
    workspace: &Path,
    instruction: &str,
    screenshots: Vec<(String, RasterImage)>,
    launcher: &Launcher,
    reasoners: Reasoners,
    config: &DebugConfig,
) -> DebugOutcome {
    let mut trace = DebugTrace::new();
    let text_only = config.ablation == Ablation::NoOperator;
    let shots = if text_only { Vec::new() } else { screenshots };
    trace.record(
        "planner",
        "start",
        json!({
            "ablation": config.ablation,
            "planner_max": config.planner_max,
            "operator_max": config.operator_max,
            "references": shots.len(),
        }),
    );

    let Reasoners {
        planner: mut planner_reasoner,
        operator,
        fixer,
    } = reasoners;
    let mut planner = PlannerState::new(instruction, shots, config.planner_max);
    let mut operator = Operator::new(operator, config.operator_max, config.history_window);
    let mut fixer = Fixer::new(fixer, config.ablation == Ablation::None);
    fixer.prepare(instruction);

    let mut feedback = None;
    let (terminated_normally, reason) = loop {
        let action = match planner.plan(planner_reasoner.as_mut(), feedback.take(), &mut trace) {
            Ok(a) => a,
            Err(e) => {
                trace.record("planner", "error", json!({"message": e.to_string()}));
                feedback = Some(FeedbackEntry::Error { message: e.to_string() });
                continue;
            }
        };
        match action {
            PlanAction::Terminate { reason } => {
                let normal = reason == "planner finished";
                trace.record("planner", "terminate", json!({"reason": reason, "normal": normal}));
                break (normal, reason);
            }
            PlanAction::DispatchOperator(subtask) => {
                trace.record(
                    "planner",
                    "dispatch",
                    json!({"agent": if text_only { "text_check" } else { "operator" }, "subtask": subtask}),
                );
                let result = if text_only {
                    operator.text_check(&subtask, instruction, workspace, launcher, config.launch_timeout, &mut trace)
                } else {
                    operator.operate(&subtask, instruction, workspace, launcher, config.launch_timeout, &mut trace)
                };
                operator.clear_session(&mut trace);
                feedback = Some(match result {
                    OperatorResult::Ok { summary } => FeedbackEntry::OperatorOk { summary },
                    OperatorResult::Bug(b) => FeedbackEntry::Bug(b),
                    OperatorResult::Error { message } => FeedbackEntry::Error { message },
                });
            }
            PlanAction::DispatchFixer(bug) => {
                trace.record("planner", "dispatch", json!({"agent": "fixer", "bug": bug.description}));
                let result = fixer.fix(&bug, workspace, &mut trace);
                fixer.clear_session(&mut trace);
                feedback = Some(match result {
                    Ok(p) => FeedbackEntry::Patch {
                        files: p.files(),
                        summary: p.summary,
                    },
                    Err(e) => FeedbackEntry::FixFailed { reason: e.to_string() },
                });
            }
        }
    };
    DebugOutcome {
        iterations: planner.iteration(),
        trace,
        terminated_normally,
        reason,
    }
}
