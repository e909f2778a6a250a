use serde::{Deserialize, Serialize};
use serde_json::json;

use super::operator::BugReport;
use super::{Context, ContextEntry, DebugTrace, DecisionKind, Reasoner, ReasonerError, Role};
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubtaskKind {
    Inspect,
    Fix,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subtask {
    pub kind: SubtaskKind,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

/// What a dispatched agent reported back.
#[derive(Debug, Clone, PartialEq)]
pub enum FeedbackEntry {
    Bug(BugReport),
    OperatorOk { summary: String },
    Patch { summary: String, files: Vec<String> },
    FixFailed { reason: String },
    Error { message: String },
}

impl FeedbackEntry {
    pub fn tag(&self) -> &'static str {
        match self {
            FeedbackEntry::Bug(_) => "bug_report",
            FeedbackEntry::OperatorOk { .. } => "operator_ok",
            FeedbackEntry::Patch { .. } => "patch",
            FeedbackEntry::FixFailed { .. } => "fix_failed",
            FeedbackEntry::Error { .. } => "error",
        }
    }

    pub fn summary(&self) -> String {
        match self {
            FeedbackEntry::Bug(b) => format!("[{}] {}", b.kind.as_str(), b.description),
            FeedbackEntry::OperatorOk { summary } | FeedbackEntry::Patch { summary, .. } => summary.clone(),
            FeedbackEntry::FixFailed { reason } => reason.clone(),
            FeedbackEntry::Error { message } => message.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlanAction {
    DispatchOperator(Subtask),
    DispatchFixer(BugReport),
    Terminate { reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerStatus {
    Planning,
    Done,
}

/// Task planner with an append-only memory. Every `plan` call counts as an
/// iteration; the call that reaches `max_iterations` terminates.
#[derive(Debug, Clone)]
pub struct PlannerState {
    instruction: String,
    screenshots: Vec<(String, RasterImage)>,
    memory: Vec<FeedbackEntry>,
    iteration: usize,
    max_iterations: usize,
    status: PlannerStatus,
}

impl PlannerState {
    pub fn new(instruction: impl Into<String>, screenshots: Vec<(String, RasterImage)>, max_iterations: usize) -> Self {
        Self {
            instruction: instruction.into(),
            screenshots,
            memory: Vec::new(),
            iteration: 0,
            max_iterations: max_iterations.max(1),
            status: PlannerStatus::Planning,
        }
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn memory(&self) -> &[FeedbackEntry] {
        &self.memory
    }

    pub fn status(&self) -> PlannerStatus {
        self.status
    }

    fn context(&self) -> Context {
        let mut c = Context::new(Role::Planner);
        c.push(ContextEntry::text("instruction", &self.instruction));
        for (label, img) in &self.screenshots {
            c.push(ContextEntry::image(format!("reference {label}"), img.clone()));
        }
        let memory = if self.memory.is_empty() {
            "empty".to_string()
        } else {
            self.memory
                .iter()
                .enumerate()
                .map(|(i, m)| format!("{}. {}: {}", i + 1, m.tag(), m.summary()))
                .collect::<Vec<_>>()
                .join("\n")
        };
        c.push(ContextEntry::text("memory", memory));
        let feedback = self
            .memory
            .last()
            .map_or_else(|| "none".to_string(), |m| format!("{}: {}", m.tag(), m.summary()));
        c.push(ContextEntry::text("feedback", feedback));
        c
    }

    fn terminate(&mut self, reason: &str, trace: &mut DebugTrace) -> PlanAction {
        self.status = PlannerStatus::Done;
        trace.record(
            "planner",
            "plan",
            json!({"iteration": self.iteration, "memory_len": self.memory.len(), "action": "terminate", "reason": reason}),
        );
        PlanAction::Terminate { reason: reason.into() }
    }

    pub fn plan(
        &mut self,
        reasoner: &mut dyn Reasoner,
        feedback: Option<FeedbackEntry>,
        trace: &mut DebugTrace,
    ) -> Result<PlanAction, ReasonerError> {
        if let Some(f) = feedback {
            self.memory.push(f);
        }
        if self.status == PlannerStatus::Done {
            return Ok(PlanAction::Terminate {
                reason: "planner already finished".into(),
            });
        }
        self.iteration += 1;
        if self.iteration >= self.max_iterations {
            return Ok(self.terminate("iteration limit reached", trace));
        }
        let ctx = self.context();
        let (decision, usage) = reasoner.propose(&ctx)?;
        trace.record(
            "planner",
            "reasoner_call",
            json!({"role": "planner", "model": reasoner.model_name(), "usage": usage, "context": ctx.audit()}),
        );
        decision.validate()?;
        let action = match (decision.kind, decision.payload.as_deref()) {
            (DecisionKind::Finish, _) => return Ok(self.terminate("planner finished", trace)),
            (DecisionKind::Plan, Some("operator")) => PlanAction::DispatchOperator(Subtask {
                kind: SubtaskKind::Inspect,
                description: decision
                    .report
                    .clone()
                    .filter(|r| !r.trim().is_empty())
                    .unwrap_or_else(|| "inspect the application".into()),
                target: decision.target.as_ref().map(|t| t.name.clone()),
            }),
            (DecisionKind::Plan, Some("fixer")) => {
                let bug = self.memory.iter().rev().find_map(|m| match m {
                    FeedbackEntry::Bug(b) => Some(b.clone()),
                    _ => None,
                });
                match bug {
                    Some(b) => PlanAction::DispatchFixer(b),
                    None => return Err(ReasonerError::Malformed("fixer dispatched without a bug report".into())),
                }
            }
            (kind, _) => {
                return Err(ReasonerError::Malformed(format!("planner cannot emit {kind:?}")));
            }
        };
        let name = match &action {
            PlanAction::DispatchOperator(_) => "operator",
            PlanAction::DispatchFixer(_) => "fixer",
            PlanAction::Terminate { .. } => unreachable!(),
        };
        trace.record(
            "planner",
            "plan",
            json!({"iteration": self.iteration, "memory_len": self.memory.len(), "action": name}),
        );
        Ok(action)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::operator::BugKind;
    use crate::agent::{default_planner_rules, ScriptedReasoner};

    fn bug() -> BugReport {
        BugReport {
            kind: BugKind::Reported,
            description: "wrong fill on Save".into(),
            screenshot: None,
            logs: String::new(),
            hint: None,
        }
    }

    #[test]
    fn policy_and_cap() {
        let mut r = ScriptedReasoner::new(default_planner_rules()).unwrap();
        let mut t = DebugTrace::new();
        let mut p = PlannerState::new("do it", Vec::new(), 10);
        assert!(matches!(p.plan(&mut r, None, &mut t).unwrap(), PlanAction::DispatchOperator(_)));
        assert_eq!(p.plan(&mut r, Some(FeedbackEntry::Bug(bug())), &mut t).unwrap(), PlanAction::DispatchFixer(bug()));
        let patch = FeedbackEntry::Patch {
            summary: "fixed".into(),
            files: vec!["app.json".into()],
        };
        assert!(matches!(p.plan(&mut r, Some(patch), &mut t).unwrap(), PlanAction::DispatchOperator(_)));
        for _ in 4..10 {
            let a = p.plan(&mut r, Some(FeedbackEntry::FixFailed { reason: "x".into() }), &mut t).unwrap();
            assert!(!matches!(a, PlanAction::Terminate { .. }) || p.iteration() == 10);
        }
        assert_eq!(p.iteration(), 9);
        let last = p.plan(&mut r, Some(FeedbackEntry::Bug(bug())), &mut t).unwrap();
        assert!(matches!(last, PlanAction::Terminate { .. }));
        assert_eq!(p.iteration(), 10);
        assert_eq!(p.status(), PlannerStatus::Done);
        assert_eq!(p.memory().len(), 9);
    }

    #[test]
    fn finish_terminates() {
        let mut r = ScriptedReasoner::new(default_planner_rules()).unwrap();
        let mut t = DebugTrace::new();
        let mut p = PlannerState::new("do it", Vec::new(), 10);
        p.plan(&mut r, None, &mut t).unwrap();
        let a = p.plan(&mut r, Some(FeedbackEntry::OperatorOk { summary: "fine".into() }), &mut t).unwrap();
        assert!(matches!(a, PlanAction::Terminate { .. }));
        assert_eq!(p.iteration(), 2);
    }

    #[test]
    fn fixer_without_bug_is_malformed() {
        let mut r = ScriptedReasoner::new(vec![crate::agent::Rule::new(crate::agent::Decision {
            kind: DecisionKind::Plan,
            payload: Some("fixer".into()),
            ..crate::agent::Decision::finish()
        })])
        .unwrap();
        let mut p = PlannerState::new("x", Vec::new(), 10);
        assert!(p.plan(&mut r, None, &mut DebugTrace::new()).is_err());
    }
}
