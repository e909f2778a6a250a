//! Benchmark suites on disk: one directory per task holding `ies.yaml`,
//! optional `meta.yaml`, `app.json` or `launch.json`, and `screens/`.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;

use crate::driver::{LaunchDescriptor, Launcher};
use crate::eval::{
    aggregate, cost_of_trace, emit_report, run_task, AggregateError, EvalConfig, PriceTable, ReportFormat,
    StepContext, SuiteReport, TaskReport,
};
use crate::ies::{parse_ies, IesScript, IesStep, StepKind};
use crate::layout::Scorer;

/// Optional per-task reasoner trace whose token usage is priced into the
/// task's cost.
pub const TRACE_FILE: &str = "trace.jsonl";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    #[default]
    Sim,
    Atspi,
}

impl FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sim" => Ok(Backend::Sim),
            "atspi" => Ok(Backend::Atspi),
            other => Err(format!("unknown backend `{other}` (expected sim or atspi)")),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SuiteError {
    #[error("{0}: not a suite directory")]
    NotADirectory(PathBuf),
    #[error("{0}: suite has no task directories")]
    Empty(PathBuf),
    #[error("task {task}: {message}")]
    Task { task: String, message: String },
    #[error("duplicate task id `{0}`")]
    DuplicateTask(String),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteTask {
    pub dir: PathBuf,
    pub script: IesScript,
    /// How to start the task's application, or why it cannot be started.
    pub launch: Result<LaunchDescriptor, String>,
}

fn launch_for(dir: &Path, backend: Backend) -> Result<LaunchDescriptor, String> {
    let app = dir.join("app.json");
    let spec = dir.join("launch.json");
    if backend == Backend::Sim && app.is_file() {
        return Ok(LaunchDescriptor::Sim { model_path: app });
    }
    if !spec.is_file() {
        return Err(match backend {
            Backend::Sim => "no app.json or launch.json".into(),
            Backend::Atspi => "no launch.json".into(),
        });
    }
    let text = std::fs::read_to_string(&spec).map_err(|e| format!("launch.json: {e}"))?;
    let desc: LaunchDescriptor = serde_json::from_str(&text).map_err(|e| format!("launch.json: {e}"))?;
    match (backend, &desc) {
        (Backend::Sim, LaunchDescriptor::Atspi { .. }) => Err("launch.json needs the atspi backend".into()),
        _ => Ok(desc.relative_to(dir)),
    }
}

/// Reads every task directory, sorted by name. Hidden entries and plain
/// files are ignored.
pub fn load_suite(dir: &Path, backend: Backend) -> Result<Vec<SuiteTask>, SuiteError> {
    if !dir.is_dir() {
        return Err(SuiteError::NotADirectory(dir.to_path_buf()));
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_dir() && !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(SuiteError::Empty(dir.to_path_buf()));
    }
    let mut seen = BTreeSet::new();
    let mut tasks = Vec::with_capacity(dirs.len());
    for d in dirs {
        let name = d.file_name().unwrap_or_default().to_string_lossy().into_owned();
        let task_err = |message: String| SuiteError::Task {
            task: name.clone(),
            message,
        };
        let text = std::fs::read_to_string(d.join("ies.yaml")).map_err(|e| task_err(format!("ies.yaml: {e}")))?;
        let script = parse_ies(&text).map_err(|e| task_err(format!("ies.yaml: {e}")))?;
        if !seen.insert(script.task_id().to_string()) {
            return Err(SuiteError::DuplicateTask(script.task_id().to_string()));
        }
        tasks.push(SuiteTask {
            launch: launch_for(&d, backend),
            dir: d,
            script,
        });
    }
    Ok(tasks)
}

#[derive(Clone)]
pub struct RunSettings<'a> {
    pub launcher: Launcher,
    pub scorer: &'a dyn Scorer,
    pub eval: EvalConfig,
    pub timeout: Duration,
    pub prices: PriceTable,
}

pub fn evaluate_task(task: &SuiteTask, settings: &RunSettings<'_>) -> TaskReport {
    let mut report = match &task.launch {
        Err(reason) => {
            let kinds: Vec<StepKind> = task.script.steps().iter().map(IesStep::kind).collect();
            TaskReport::failed_to_start(task.script.task_id(), &kinds, reason.clone())
        }
        Ok(desc) => {
            let session = settings
                .launcher
                .clone()
                .with_working_dir(&task.dir)
                .launch(desc, settings.timeout);
            let ctx = StepContext::new(settings.scorer, &task.dir, &settings.eval);
            run_task(&task.script, session, &ctx)
        }
    };
    let trace = task.dir.join(TRACE_FILE);
    if trace.is_file() {
        match cost_of_trace(&trace, &settings.prices) {
            Ok(c) => report.cost = c,
            Err(e) => {
                let note = format!("trace not priced: {e}");
                report.detail = Some(match report.detail.take() {
                    Some(d) => format!("{d}; {note}"),
                    None => note,
                });
            }
        }
    }
    report
}

/// Evaluates all tasks on a pool of `workers` threads. Reports come back in
/// task order whatever the pool size.
pub fn run_suite(tasks: &[SuiteTask], settings: &RunSettings<'_>, workers: usize) -> Vec<TaskReport> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| tasks.par_iter().map(|t| evaluate_task(t, settings)).collect())
}

fn file_stem_for(task_id: &str) -> String {
    task_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes `suite.{json,csv,md}` and `tasks/<task_id>.json` under `out`.
pub fn write_reports(out: &Path, tasks: &[TaskReport]) -> Result<SuiteReport, SuiteError> {
    let suite = aggregate(tasks)?;
    std::fs::create_dir_all(out.join("tasks"))?;
    for (format, name) in [
        (ReportFormat::Json, "suite.json"),
        (ReportFormat::Csv, "suite.csv"),
        (ReportFormat::Md, "suite.md"),
    ] {
        std::fs::write(out.join(name), emit_report(&suite, tasks, format))?;
    }
    for t in tasks {
        let mut json = serde_json::to_string_pretty(t).expect("task report serializes");
        json.push('\n');
        std::fs::write(out.join("tasks").join(format!("{}.json", file_stem_for(&t.task_id))), json)?;
    }
    Ok(suite)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::GridScorer;
    use crate::sim::fixtures::TWO_PAGE;

    fn task(root: &Path, name: &str, ies: &str, app: Option<&str>) {
        let d = root.join(name);
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("ies.yaml"), ies).unwrap();
        if let Some(a) = app {
            std::fs::write(d.join("app.json"), a).unwrap();
        }
    }

    #[test]
    fn missing_model_is_fs_and_run_continues() {
        let root = tempfile::tempdir().unwrap();
        task(root.path(), "a", "task_id: a\nsteps:\n  - assert_element: {name: Save}\n", Some(TWO_PAGE));
        task(root.path(), "b", "task_id: b\nsteps:\n  - click: {name: Save}\n", None);
        let tasks = load_suite(root.path(), Backend::Sim).unwrap();
        let settings = RunSettings {
            launcher: Launcher::new(),
            scorer: &GridScorer,
            eval: EvalConfig::default(),
            timeout: Duration::from_secs(1),
            prices: PriceTable::default(),
        };
        let reports = run_suite(&tasks, &settings, 2);
        assert!(reports[0].resolved);
        assert!(reports[1].fs);
        assert!(reports[1].detail.as_deref().unwrap().contains("app.json"));
        let out = root.path().join("out");
        let suite = write_reports(&out, &reports).unwrap();
        assert_eq!(suite.n_tasks, 2);
        assert!(out.join("tasks/b.json").is_file());
        assert!(out.join("suite.md").is_file());
    }

    #[test]
    fn structure_errors() {
        let root = tempfile::tempdir().unwrap();
        assert!(matches!(load_suite(root.path(), Backend::Sim), Err(SuiteError::Empty(_))));
        task(root.path(), "a", "task_id: a\nsteps: [", None);
        assert!(matches!(load_suite(root.path(), Backend::Sim), Err(SuiteError::Task { .. })));
        assert!(matches!(
            load_suite(&root.path().join("nope"), Backend::Sim),
            Err(SuiteError::NotADirectory(_))
        ));
    }

    #[test]
    fn trace_cost_is_priced() {
        let root = tempfile::tempdir().unwrap();
        task(root.path(), "a", "task_id: a\nsteps:\n  - assert_element: {name: Save}\n", Some(TWO_PAGE));
        std::fs::write(
            root.path().join("a").join(TRACE_FILE),
            r#"{"ts":0,"actor":"planner","event":"reasoner_call","payload":{"model":"m","usage":{"prompt_tokens":2000,"completion_tokens":1000}}}"#,
        )
        .unwrap();
        let tasks = load_suite(root.path(), Backend::Sim).unwrap();
        let prices: PriceTable = serde_json::from_str(r#"{"m": {"in": 0.5, "out": 1.0}}"#).unwrap();
        let settings = RunSettings {
            launcher: Launcher::new(),
            scorer: &GridScorer,
            eval: EvalConfig::default(),
            timeout: Duration::from_secs(1),
            prices,
        };
        let r = evaluate_task(&tasks[0], &settings);
        assert!((r.cost - 2.0).abs() < 1e-12);
    }
}
