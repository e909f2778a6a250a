//! Runs IES scripts against driver sessions and aggregates suite metrics.

mod cost;
mod report;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::driver::{find, Action, ActOutcome, DriverError, DriverSession, SessionStatus};
use crate::ies::{IesScript, IesStep, Selector, StepKind};
use crate::layout::Scorer;
use crate::raster::RasterImage;

pub use cost::{cost_of_trace, Price, PriceTable, Usage};
pub use report::{aggregate, emit_report, parse_report, AggregateError, ReportFormat, SuiteDocument, SuiteReport};

/// Colors closer than this pass an `assert_color` step.
pub const COLOR_THRESHOLD: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum StepResult {
    Pass,
    Fail { reason: String },
    Scored { score: f64 },
    Unattempted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub index: usize,
    pub kind: StepKind,
    #[serde(flatten)]
    pub result: StepResult,
    /// Layout score, kept even when a gate turns the step into a failure.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_score: Option<f64>,
}

impl StepOutcome {
    fn new(index: usize, kind: StepKind, result: StepResult) -> Self {
        let layout_score = match result {
            StepResult::Scored { score } => Some(score),
            _ => None,
        };
        Self {
            index,
            kind,
            result,
            layout_score,
        }
    }

    pub fn is_pass(&self) -> bool {
        matches!(self.result, StepResult::Pass)
    }

    /// Whether this outcome blocks `resolved`. Scored layout steps never do.
    pub fn is_blocking(&self) -> bool {
        matches!(self.result, StepResult::Fail { .. } | StepResult::Unattempted)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub fs: bool,
    pub outcomes: Vec<StepOutcome>,
    pub resolved: bool,
    pub visual_score: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl TaskReport {
    /// Report for a task that could not be evaluated at all.
    pub fn failed_to_start(task_id: impl Into<String>, kinds: &[StepKind], detail: impl Into<String>) -> Self {
        Self {
            task_id: task_id.into(),
            fs: true,
            outcomes: kinds
                .iter()
                .enumerate()
                .map(|(i, &k)| StepOutcome::new(i, k, StepResult::Unattempted))
                .collect(),
            resolved: false,
            visual_score: 0.0,
            cost: 0.0,
            detail: Some(detail.into()),
        }
    }
}

/// Per-run evaluation settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvalConfig {
    /// Layout scores below this count as failed steps.
    pub layout_gate: Option<f64>,
}

/// Everything a step needs besides the session.
pub struct StepContext<'a> {
    pub scorer: &'a dyn Scorer,
    /// Directory that layout reference paths are relative to.
    pub base_dir: &'a Path,
    pub config: &'a EvalConfig,
    refs: Mutex<HashMap<PathBuf, RasterImage>>,
}

impl<'a> StepContext<'a> {
    pub fn new(scorer: &'a dyn Scorer, base_dir: &'a Path, config: &'a EvalConfig) -> Self {
        Self {
            scorer,
            base_dir,
            config,
            refs: Mutex::new(HashMap::new()),
        }
    }

    fn reference(&self, rel: &str) -> Result<RasterImage, String> {
        let path = self.base_dir.join(rel);
        let mut cache = self.refs.lock().expect("reference cache lock");
        if let Some(img) = cache.get(&path) {
            return Ok(img.clone());
        }
        let img = RasterImage::load_png(&path).map_err(|e| format!("reference {rel}: {e}"))?;
        cache.insert(path, img.clone());
        Ok(img)
    }
}

enum StepError {
    Fail(String),
    Dead,
}

impl From<DriverError> for StepError {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::SessionDead => StepError::Dead,
            other => StepError::Fail(other.to_string()),
        }
    }
}

fn locate(session: &mut DriverSession, sel: &Selector) -> Result<crate::driver::AccessibilityNode, StepError> {
    let tree = session.snapshot_tree()?;
    Ok(find(&tree, sel)?.node)
}

fn interact(session: &mut DriverSession, sel: &Selector, action: Action) -> Result<(), StepError> {
    let node = locate(session, sel)?;
    match session.act(&node, &action)? {
        ActOutcome::Accepted => Ok(()),
        ActOutcome::Rejected(why) => Err(StepError::Fail(format!("{} rejected on {sel}: {why:?}", action.kind()))),
    }
}

fn judge(session: &mut DriverSession, step: &IesStep, ctx: &StepContext<'_>) -> Result<StepResult, StepError> {
    match step {
        IesStep::AssertElement { selector } => {
            let node = locate(session, selector)?;
            if node.is_visible() {
                Ok(StepResult::Pass)
            } else {
                Err(StepError::Fail(format!("{selector} is not visible")))
            }
        }
        IesStep::AssertColor { selector, expected } => {
            let node = locate(session, selector)?;
            let shot = session.screenshot()?;
            let region = shot
                .crop(&node.bounds)
                .ok_or_else(|| StepError::Fail(format!("{selector} lies outside the screenshot")))?;
            let seen = region.dominant_color().expect("crop is non-empty");
            let d = seen.distance(*expected);
            if d < COLOR_THRESHOLD {
                Ok(StepResult::Pass)
            } else {
                Err(StepError::Fail(format!(
                    "{selector} is {} not {} (distance {d:.2})",
                    seen.to_hex(),
                    expected.to_hex()
                )))
            }
        }
        IesStep::AssertLayout { ref_image_path, .. } => {
            let reference = ctx.reference(ref_image_path).map_err(StepError::Fail)?;
            let shot = session.screenshot()?;
            let score = ctx
                .scorer
                .score(&reference, &shot)
                .map_err(|e| StepError::Fail(e.to_string()))?;
            Ok(StepResult::Scored { score })
        }
        IesStep::Click { selector } => interact(session, selector, Action::Click).map(|()| StepResult::Pass),
        IesStep::InputText { selector, text } => {
            let node = locate(session, selector)?;
            match session.act(&node, &Action::SetText(text.clone()))? {
                ActOutcome::Accepted => {}
                ActOutcome::Rejected(why) => {
                    return Err(StepError::Fail(format!("set_text rejected on {selector}: {why:?}")))
                }
            }
            let tree = session.snapshot_tree()?;
            let shown = tree.find_id(&node.node_id).and_then(|n| n.text.clone());
            if shown.as_deref() == Some(text.as_str()) {
                Ok(StepResult::Pass)
            } else {
                Err(StepError::Fail(format!("{selector} shows {shown:?} after input")))
            }
        }
        IesStep::SelectDropdown { selector, option } => {
            interact(session, selector, Action::Select(option.clone())).map(|()| StepResult::Pass)
        }
    }
}

/// Executes one step. The boolean is false once the session has died.
pub fn exec_step(
    session: &mut DriverSession,
    index: usize,
    step: &IesStep,
    ctx: &StepContext<'_>,
) -> (StepOutcome, bool) {
    let kind = step.kind();
    match judge(session, step, ctx) {
        Ok(StepResult::Scored { score }) => {
            let result = match ctx.config.layout_gate {
                Some(gate) if score < gate => StepResult::Fail {
                    reason: format!("layout score {score:.4} below gate {gate}"),
                },
                _ => StepResult::Scored { score },
            };
            let mut out = StepOutcome::new(index, kind, result);
            out.layout_score = Some(score);
            (out, true)
        }
        Ok(result) => (StepOutcome::new(index, kind, result), true),
        Err(StepError::Fail(reason)) => (StepOutcome::new(index, kind, StepResult::Fail { reason }), true),
        Err(StepError::Dead) => {
            let reason = "application exited".to_string();
            (StepOutcome::new(index, kind, StepResult::Fail { reason }), false)
        }
    }
}

/// Single-attempt evaluation: one session, every step in order, failures
/// non-fatal. Session death marks the remaining steps unattempted.
pub fn run_task(script: &IesScript, session: DriverSession, ctx: &StepContext<'_>) -> TaskReport {
    let mut session = session;
    let kinds: Vec<StepKind> = script.steps().iter().map(IesStep::kind).collect();
    if session.status() != SessionStatus::Running {
        let tail = session.log_tail(3).join(" | ");
        let detail = if tail.is_empty() {
            "failed to start".to_string()
        } else {
            format!("failed to start: {tail}")
        };
        return TaskReport::failed_to_start(script.task_id(), &kinds, detail);
    }
    let mut outcomes = Vec::with_capacity(kinds.len());
    let mut alive = true;
    for (i, step) in script.steps().iter().enumerate() {
        if !alive {
            outcomes.push(StepOutcome::new(i, step.kind(), StepResult::Unattempted));
            continue;
        }
        let (outcome, still) = exec_step(&mut session, i, step, ctx);
        outcomes.push(outcome);
        alive = still;
    }
    session.terminate();
    let layout: Vec<f64> = outcomes
        .iter()
        .filter(|o| o.kind == StepKind::AssertLayout)
        .map(|o| o.layout_score.unwrap_or(0.0))
        .collect();
    let visual_score = if layout.is_empty() {
        0.0
    } else {
        layout.iter().sum::<f64>() / layout.len() as f64
    };
    let resolved = !outcomes.iter().any(StepOutcome::is_blocking);
    TaskReport {
        task_id: script.task_id().to_string(),
        fs: false,
        outcomes,
        resolved,
        visual_score,
        cost: 0.0,
        detail: None,
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;
    use std::time::Duration;

    use super::*;
    use crate::driver::Launcher;
    use crate::ies::parse_ies;
    use crate::layout::GridScorer;
    use crate::raster::Rgb;
    use crate::sim::{fixtures::TWO_PAGE, load_model, AppModel};

    fn run(model: AppModel, ies: &str, dir: &Path, config: &EvalConfig) -> TaskReport {
        let script = parse_ies(ies).unwrap();
        let session = Launcher::new().launch_model(Arc::new(model), Duration::from_secs(1));
        let scorer = GridScorer;
        let ctx = StepContext::new(&scorer, dir, config);
        run_task(&script, session, &ctx)
    }

    fn model() -> AppModel {
        load_model(TWO_PAGE).unwrap()
    }

    #[test]
    fn all_pass_resolves() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(
            model(),
            r#"
task_id: ok
steps:
  - assert_element: {name: Save}
  - assert_color: {name: Settings, rgb: [255, 0, 0]}
  - input_text: {name: Search, text: abc}
  - click: {name: Settings}
  - assert_element: {name: Dark mode}
"#,
            dir.path(),
            &EvalConfig::default(),
        );
        assert!(r.resolved, "{r:?}");
        assert!(!r.fs);
        assert_eq!(r.visual_score, 0.0);
    }

    #[test]
    fn failures_are_not_fatal() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(
            model(),
            r#"
task_id: t
steps:
  - click: {name: Missing}
  - assert_color: {name: Save, rgb: [0, 0, 0]}
  - input_text: {name: Search, text: abc}
  - assert_color: {name: Save, rgb: [0, 0, 0]}
"#,
            dir.path(),
            &EvalConfig::default(),
        );
        let pass: Vec<bool> = r.outcomes.iter().map(StepOutcome::is_pass).collect();
        assert_eq!(pass, [false, false, true, true]);
        assert!(!r.resolved);
    }

    #[test]
    fn crash_is_failed_to_start() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = model();
        m.crash_on_start = Some("boom".into());
        let r = run(m, "task_id: c\nsteps:\n  - assert_element: {name: Save}\n  - click: {name: Save}\n", dir.path(), &EvalConfig::default());
        assert!(r.fs && !r.resolved);
        assert_eq!(r.visual_score, 0.0);
        assert!(r.outcomes.iter().all(|o| o.result == StepResult::Unattempted));
        assert!(r.detail.unwrap().contains("boom"));
    }

    #[test]
    fn rejected_click_fails() {
        let dir = tempfile::tempdir().unwrap();
        let r = run(model(), "task_id: r\nsteps:\n  - click: {name: Search, role: text}\n", dir.path(), &EvalConfig::default());
        assert!(matches!(&r.outcomes[0].result, StepResult::Fail { reason } if reason.contains("rejected")));
    }

    fn solid_model(c: Rgb) -> AppModel {
        let mut m = model();
        let main = m.pages.get_mut("main").unwrap();
        main.widgets[0].fill = c;
        m
    }

    #[test]
    fn color_threshold_is_strict() {
        let dir = tempfile::tempdir().unwrap();
        let ies = "task_id: c\nsteps:\n  - assert_color: {name: Settings, rgb: [0, 0, 0]}\n";
        let at = |v: u8| run(solid_model(Rgb::new(v, v, v)), ies, dir.path(), &EvalConfig::default()).resolved;
        assert!(at(46));
        assert!(!at(47));
    }

    #[test]
    fn layout_scores_and_gate() {
        let dir = tempfile::tempdir().unwrap();
        crate::sim::render_page(model().initial()).save_png(dir.path().join("main.png")).unwrap();
        let ies = "task_id: l\nscreens: [main.png]\nsteps:\n  - assert_layout: {page: main, ref: main.png}\n  - click: {name: Settings}\n  - assert_layout: {page: main, ref: main.png}\n";
        let r = run(model(), ies, dir.path(), &EvalConfig::default());
        assert_eq!(r.outcomes[0].result, StepResult::Scored { score: 1.0 });
        let second = r.outcomes[2].layout_score.unwrap();
        assert!(second < 1.0);
        assert!(r.resolved);
        assert!((r.visual_score - (1.0 + second) / 2.0).abs() < 1e-12);

        let gated = run(model(), ies, dir.path(), &EvalConfig { layout_gate: Some(0.99) });
        assert!(!gated.resolved);
        assert_eq!(gated.outcomes[2].layout_score, Some(second));
        assert!(matches!(gated.outcomes[2].result, StepResult::Fail { .. }));
    }

    #[test]
    fn missing_reference_fails_with_zero_visual() {
        let dir = tempfile::tempdir().unwrap();
        let ies = "task_id: l\nscreens: [nope.png]\nsteps:\n  - assert_layout: {page: main, ref: nope.png}\n";
        let r = run(model(), ies, dir.path(), &EvalConfig::default());
        assert!(matches!(r.outcomes[0].result, StepResult::Fail { .. }));
        assert_eq!(r.visual_score, 0.0);
    }
}
