use std::path::{Component, Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use super::operator::BugReport;
use super::{Context, ContextEntry, DebugTrace, DecisionKind, Reasoner, ReasonerError, Role};

/// Source files larger than this are listed but not included in context.
const MAX_SOURCE_BYTES: u64 = 256 * 1024;

/// Whole-file replacement proposed by a reasoner.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEdit {
    pub path: String,
    pub content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchEdit {
    pub path: String,
    /// sha256 of the file as the fixer read it.
    pub before_hash: String,
    pub after_content: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Patch {
    pub edits: Vec<PatchEdit>,
    pub summary: String,
}

impl Patch {
    pub fn files(&self) -> Vec<String> {
        self.edits.iter().map(|e| e.path.clone()).collect()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FixError {
    #[error("path `{0}` escapes the workspace")]
    OutsideWorkspace(String),
    #[error("`{0}` does not exist in the workspace")]
    UnknownFile(String),
    #[error("`{0}` changed since it was read")]
    StaleWorkspace(String),
    #[error("fixer gave no edit: {0}")]
    NoEdit(String),
    #[error(transparent)]
    Reasoner(#[from] ReasonerError),
    #[error("workspace io: {0}")]
    Io(#[from] std::io::Error),
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn resolve(workspace: &Path, rel: &str) -> Result<PathBuf, FixError> {
    let p = Path::new(rel);
    let escapes = p.is_absolute()
        || p.components()
            .any(|c| matches!(c, Component::ParentDir | Component::RootDir | Component::Prefix(_)));
    if rel.is_empty() || escapes {
        return Err(FixError::OutsideWorkspace(rel.to_string()));
    }
    let full = workspace.join(p);
    if !full.is_file() {
        return Err(FixError::UnknownFile(rel.to_string()));
    }
    let root = workspace.canonicalize()?;
    if !full.canonicalize()?.starts_with(&root) {
        return Err(FixError::OutsideWorkspace(rel.to_string()));
    }
    Ok(full)
}

/// Applies every edit or none. Each target must exist and still hash to
/// `before_hash`.
pub fn apply_patch(workspace: &Path, patch: &Patch) -> Result<(), FixError> {
    let mut staged = Vec::with_capacity(patch.edits.len());
    for e in &patch.edits {
        let full = resolve(workspace, &e.path)?;
        if sha256_hex(&std::fs::read(&full)?) != e.before_hash {
            return Err(FixError::StaleWorkspace(e.path.clone()));
        }
        let dir = full.parent().unwrap_or(workspace);
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        std::io::Write::write_all(&mut tmp, e.after_content.as_bytes())?;
        staged.push((tmp, full));
    }
    for (tmp, full) in staged {
        tmp.persist(&full).map_err(|e| e.error)?;
    }
    Ok(())
}

/// Workspace text files, relative path order.
fn read_sources(workspace: &Path) -> std::io::Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(workspace).sort_by_file_name() {
        let entry = entry.map_err(std::io::Error::other)?;
        if !entry.file_type().is_file() {
            continue;
        }
        let rel = entry.path().strip_prefix(workspace).expect("walk stays under root");
        if rel.components().any(|c| c.as_os_str() == ".git") {
            continue;
        }
        let rel = rel.to_string_lossy().replace('\\', "/");
        if entry.metadata().map_err(std::io::Error::other)?.len() > MAX_SOURCE_BYTES {
            out.push((rel, "<file too large>".into()));
            continue;
        }
        if let Ok(text) = std::fs::read_to_string(entry.path()) {
            out.push((rel, text));
        }
    }
    Ok(out)
}

pub struct Fixer {
    reasoner: Box<dyn Reasoner>,
    include_bug_screenshot: bool,
    instruction: String,
    memory: Vec<String>,
}

impl Fixer {
    pub fn new(reasoner: Box<dyn Reasoner>, include_bug_screenshot: bool) -> Self {
        Self {
            reasoner,
            include_bug_screenshot,
            instruction: String::new(),
            memory: Vec::new(),
        }
    }

    /// Sets the task the fixer repairs towards.
    pub fn prepare(&mut self, instruction: &str) {
        self.instruction = instruction.to_string();
    }

    pub fn memory_len(&self) -> usize {
        self.memory.len()
    }

    pub fn clear_session(&mut self, trace: &mut DebugTrace) {
        self.memory.clear();
        trace.record("fixer", "clear_session", json!({"agent": "fixer", "remaining": self.memory.len()}));
    }

    fn context(&self, bug: &BugReport, sources: &[(String, String)]) -> Context {
        let mut c = Context::new(Role::Fixer);
        c.push(ContextEntry::text("instruction", &self.instruction));
        if !self.memory.is_empty() {
            c.push(ContextEntry::text("previous fixes", self.memory.join("\n")));
        }
        let mut bug_text = format!("kind: {}\ndescription: {}\n", bug.kind.as_str(), bug.description);
        if let Some(h) = &bug.hint {
            bug_text.push_str(&format!("target: {h}\n"));
        }
        if !bug.logs.is_empty() {
            bug_text.push_str(&format!("logs:\n{}\n", bug.logs));
        }
        c.push(ContextEntry::text("bug", bug_text));
        if self.include_bug_screenshot {
            if let Some(img) = &bug.screenshot {
                c.push(ContextEntry::image("bug screenshot", img.clone()));
            }
        }
        for (path, text) in sources {
            c.push(ContextEntry::text(format!("file {path}"), text));
        }
        c
    }

    /// Asks for edits addressing `bug` and applies them to `workspace`.
    pub fn fix(&mut self, bug: &BugReport, workspace: &Path, trace: &mut DebugTrace) -> Result<Patch, FixError> {
        let sources = read_sources(workspace)?;
        let ctx = self.context(bug, &sources);
        let (decision, usage) = self.reasoner.propose(&ctx)?;
        trace.record(
            "fixer",
            "reasoner_call",
            json!({"role": "fixer", "model": self.reasoner.model_name(), "usage": usage, "context": ctx.audit()}),
        );
        decision.validate()?;
        if decision.kind != DecisionKind::Edit {
            let why = decision.report.unwrap_or_else(|| format!("{:?}", decision.kind));
            trace.record("fixer", "no_edit", json!({"reason": why}));
            return Err(FixError::NoEdit(why));
        }
        let mut edits = Vec::new();
        for e in decision.edits.unwrap_or_default() {
            let full = resolve(workspace, &e.path)?;
            edits.push(PatchEdit {
                before_hash: sha256_hex(&std::fs::read(full)?),
                path: e.path,
                after_content: e.content,
            });
        }
        let patch = Patch {
            edits,
            summary: decision
                .report
                .unwrap_or_else(|| format!("addressed: {}", bug.description)),
        };
        let applied = apply_patch(workspace, &patch);
        trace.record(
            "fixer",
            "patch",
            json!({"files": patch.files(), "summary": patch.summary, "applied": applied.is_ok()}),
        );
        applied?;
        self.memory.push(format!("{} ({})", patch.summary, patch.files().join(", ")));
        Ok(patch)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::operator::BugKind;
    use crate::agent::{Decision, Rule, ScriptedReasoner};
    use crate::raster::RasterImage;

    fn edit(path: &str, before: &str, after: &str) -> PatchEdit {
        PatchEdit {
            path: path.into(),
            before_hash: sha256_hex(before.as_bytes()),
            after_content: after.into(),
        }
    }

    #[test]
    fn patch_is_all_or_nothing() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("a.txt"), "one").unwrap();
        std::fs::write(dir.path().join("b.txt"), "two").unwrap();
        let stale = Patch {
            edits: vec![edit("a.txt", "one", "ONE"), edit("b.txt", "changed", "TWO")],
            summary: String::new(),
        };
        assert!(matches!(apply_patch(dir.path(), &stale), Err(FixError::StaleWorkspace(_))));
        assert_eq!(std::fs::read_to_string(dir.path().join("a.txt")).unwrap(), "one");
        let good = Patch {
            edits: vec![edit("a.txt", "one", "ONE"), edit("b.txt", "two", "TWO")],
            summary: String::new(),
        };
        apply_patch(dir.path(), &good).unwrap();
        assert_eq!(std::fs::read_to_string(dir.path().join("b.txt")).unwrap(), "TWO");
    }

    #[test]
    fn paths_must_stay_inside() {
        let dir = tempfile::tempdir().unwrap();
        for bad in ["../x", "/etc/passwd", ""] {
            let p = Patch {
                edits: vec![edit(bad, "", "")],
                summary: String::new(),
            };
            assert!(matches!(apply_patch(dir.path(), &p), Err(FixError::OutsideWorkspace(_))), "{bad}");
        }
        let missing = Patch {
            edits: vec![edit("new.txt", "", "x")],
            summary: String::new(),
        };
        assert!(matches!(apply_patch(dir.path(), &missing), Err(FixError::UnknownFile(_))));
    }

    #[test]
    fn fix_applies_edit_and_remembers() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("app.json"), "{\"bad\": 1}").unwrap();
        let decision = Decision {
            kind: DecisionKind::Edit,
            report: Some("restore fill".into()),
            edits: Some(vec![FileEdit {
                path: "app.json".into(),
                content: "{}".into(),
            }]),
            ..Decision::finish()
        };
        let r = ScriptedReasoner::new(vec![Rule::new(decision)]).unwrap();
        let mut f = Fixer::new(Box::new(r), false);
        f.prepare("make it blue");
        let bug = BugReport {
            kind: BugKind::Reported,
            description: "red".into(),
            screenshot: Some(RasterImage::filled(2, 2, crate::raster::Rgb::WHITE)),
            logs: String::new(),
            hint: None,
        };
        let mut t = DebugTrace::new();
        let p = f.fix(&bug, dir.path(), &mut t).unwrap();
        assert_eq!(p.files(), vec!["app.json".to_string()]);
        assert_eq!(std::fs::read_to_string(dir.path().join("app.json")).unwrap(), "{}");
        assert_eq!(f.memory_len(), 1);
        let call = t.of("fixer", "reasoner_call").next().unwrap();
        assert_eq!(call.payload["context"]["images"], 0);
        f.clear_session(&mut t);
        assert_eq!(f.memory_len(), 0);
    }
}
