//! Suite metrics and their JSON, CSV and Markdown projections.

use serde::{Deserialize, Serialize};

use super::{StepOutcome, TaskReport};
use crate::ies::StepKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum AggregateError {
    #[error("no task reports to aggregate")]
    EmptyInput,
}

/// Percentages are in `[0, 100]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub resolved_pct: f64,
    pub fs_pct: f64,
    pub ae: f64,
    pub ac: f64,
    pub ck: f64,
    pub avg_visual: f64,
    pub avg_cost: f64,
    pub n_tasks: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteDocument {
    pub suite: SuiteReport,
    pub tasks: Vec<TaskReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
    Md,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            "md" => Ok(Self::Md),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

fn sorted(reports: &[TaskReport]) -> Vec<&TaskReport> {
    let mut v: Vec<&TaskReport> = reports.iter().collect();
    v.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    v
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        100.0 * num as f64 / den as f64
    }
}

/// Suite metrics. Operation rates count unattempted operations as failures
/// and are 0 when the suite has no operation of that kind.
pub fn aggregate(reports: &[TaskReport]) -> Result<SuiteReport, AggregateError> {
    if reports.is_empty() {
        return Err(AggregateError::EmptyInput);
    }
    // Summing in task_id order keeps float results independent of input order.
    let tasks = sorted(reports);
    let n = tasks.len();
    let op_rate = |kind: StepKind| {
        let ops: Vec<&StepOutcome> = tasks
            .iter()
            .flat_map(|t| &t.outcomes)
            .filter(|o| o.kind == kind)
            .collect();
        pct(ops.iter().filter(|o| o.is_pass()).count(), ops.len())
    };
    Ok(SuiteReport {
        resolved_pct: pct(tasks.iter().filter(|t| t.resolved).count(), n),
        fs_pct: pct(tasks.iter().filter(|t| t.fs).count(), n),
        ae: op_rate(StepKind::AssertElement),
        ac: op_rate(StepKind::AssertColor),
        ck: op_rate(StepKind::Click),
        avg_visual: tasks.iter().map(|t| t.visual_score).sum::<f64>() / n as f64,
        avg_cost: tasks.iter().map(|t| t.cost).sum::<f64>() / n as f64,
        n_tasks: n,
    })
}

/// Deterministic serialization; tasks are listed by `task_id`.
pub fn emit_report(suite: &SuiteReport, tasks: &[TaskReport], format: ReportFormat) -> String {
    let tasks: Vec<TaskReport> = sorted(tasks).into_iter().cloned().collect();
    match format {
        ReportFormat::Json => {
            let doc = SuiteDocument {
                suite: suite.clone(),
                tasks,
            };
            let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["task_id", "fs", "resolved", "visual_score", "cost"])
                .expect("in-memory write");
            for t in &tasks {
                w.write_record([
                    t.task_id.clone(),
                    t.fs.to_string(),
                    t.resolved.to_string(),
                    t.visual_score.to_string(),
                    t.cost.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv is utf-8")
        }
        ReportFormat::Md => {
            let mut s = String::from("# Suite report\n\n");
            s += &format!("- tasks: {}\n", suite.n_tasks);
            s += &format!("- resolved: {:.2}%\n", suite.resolved_pct);
            s += &format!("- failed to start: {:.2}%\n", suite.fs_pct);
            s += &format!(
                "- assert element / assert color / click: {:.2}% / {:.2}% / {:.2}%\n",
                suite.ae, suite.ac, suite.ck
            );
            s += &format!("- average visual score: {:.4}\n", suite.avg_visual);
            s += &format!("- average cost: {:.4}\n\n", suite.avg_cost);
            s += "| task_id | fs | resolved | visual_score | cost |\n";
            s += "|---|---|---|---|---|\n";
            for t in &tasks {
                s += &format!(
                    "| {} | {} | {} | {:.4} | {:.4} |\n",
                    t.task_id.replace('|', "\\|"),
                    t.fs,
                    t.resolved,
                    t.visual_score,
                    t.cost
                );
            }
            s
        }
    }
}

pub fn parse_report(json: &str) -> Result<SuiteDocument, serde_json::Error> {
    serde_json::from_str(json)
}
