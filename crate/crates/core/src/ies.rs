//! Interactive evaluation scripts: the declarative list of assertions and
//! interactions run against a GUI, plus consistency checks against task
//! metadata.
//!
//! A script document is YAML:
//!
//! ```yaml
//! task_id: downloader-01
//! screens: [screens/main.png]
//! steps:
//!   - assert_element: {name: Download, role: button}
//!   - assert_color: {name: Download, rgb: [0, 122, 255]}
//!   - click: {name: Download}
//!   - assert_layout: {page: main, ref: screens/main.png}
//! ```

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_yaml::{Mapping, Value};

use crate::raster::Rgb;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IesError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("step {index}: unknown operation `{kind}`")]
    UnknownOp { index: usize, kind: String },
    #[error("{context}: missing required field `{field}`")]
    MissingField { context: String, field: String },
    #[error("{context}: invalid field `{field}`: {reason}")]
    InvalidField {
        context: String,
        field: String,
        reason: String,
    },
    #[error("script has no steps")]
    EmptySteps,
    #[error("step {index}: layout reference `{path}` is not listed in screens")]
    UnlistedScreen { index: usize, path: String },
}

/// Identifies a widget by display name, optional role, and 0-based index
/// among equal matches in pre-order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Selector {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    pub name: String,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub nth: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl Selector {
    pub fn named(name: impl Into<String>) -> Self {
        Self {
            role: None,
            name: name.into(),
            nth: 0,
        }
    }

    pub fn with_role(mut self, role: impl Into<String>) -> Self {
        self.role = Some(role.into());
        self
    }

    pub fn with_nth(mut self, nth: usize) -> Self {
        self.nth = nth;
        self
    }
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.name)?;
        if let Some(role) = &self.role {
            write!(f, " [{role}]")?;
        }
        if self.nth > 0 {
            write!(f, " #{}", self.nth)?;
        }
        Ok(())
    }
}

/// Trim, collapse inner whitespace, and lowercase.
pub fn normalize_name(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    AssertElement,
    AssertColor,
    AssertLayout,
    Click,
    InputText,
    SelectDropdown,
}

impl StepKind {
    pub const ALL: [StepKind; 6] = [
        StepKind::AssertElement,
        StepKind::AssertColor,
        StepKind::AssertLayout,
        StepKind::Click,
        StepKind::InputText,
        StepKind::SelectDropdown,
    ];

    pub fn key(self) -> &'static str {
        match self {
            StepKind::AssertElement => "assert_element",
            StepKind::AssertColor => "assert_color",
            StepKind::AssertLayout => "assert_layout",
            StepKind::Click => "click",
            StepKind::InputText => "input_text",
            StepKind::SelectDropdown => "select_dropdown",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.key() == key)
    }

    pub fn is_interaction(self) -> bool {
        matches!(
            self,
            StepKind::Click | StepKind::InputText | StepKind::SelectDropdown
        )
    }
}

impl fmt::Display for StepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IesStep {
    AssertElement { selector: Selector },
    AssertColor { selector: Selector, expected: Rgb },
    AssertLayout { page_id: String, ref_image_path: String },
    Click { selector: Selector },
    InputText { selector: Selector, text: String },
    SelectDropdown { selector: Selector, option: String },
}

impl IesStep {
    pub fn kind(&self) -> StepKind {
        match self {
            IesStep::AssertElement { .. } => StepKind::AssertElement,
            IesStep::AssertColor { .. } => StepKind::AssertColor,
            IesStep::AssertLayout { .. } => StepKind::AssertLayout,
            IesStep::Click { .. } => StepKind::Click,
            IesStep::InputText { .. } => StepKind::InputText,
            IesStep::SelectDropdown { .. } => StepKind::SelectDropdown,
        }
    }

    pub fn selector(&self) -> Option<&Selector> {
        match self {
            IesStep::AssertElement { selector }
            | IesStep::AssertColor { selector, .. }
            | IesStep::Click { selector }
            | IesStep::InputText { selector, .. }
            | IesStep::SelectDropdown { selector, .. } => Some(selector),
            IesStep::AssertLayout { .. } => None,
        }
    }
}

/// A validated script. Construction enforces a non-empty step list and that
/// every layout reference is listed in `screens`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IesScript {
    task_id: String,
    steps: Vec<IesStep>,
    screens: Vec<String>,
}

impl IesScript {
    pub fn new(
        task_id: impl Into<String>,
        steps: Vec<IesStep>,
        screens: Vec<String>,
    ) -> Result<Self, IesError> {
        if steps.is_empty() {
            return Err(IesError::EmptySteps);
        }
        for (index, step) in steps.iter().enumerate() {
            if let Some(sel) = step.selector() {
                if sel.name.is_empty() {
                    return Err(IesError::InvalidField {
                        context: format!("step {index}"),
                        field: "name".into(),
                        reason: "must be non-empty".into(),
                    });
                }
            }
            if let IesStep::AssertLayout { ref_image_path, .. } = step {
                if !screens.contains(ref_image_path) {
                    return Err(IesError::UnlistedScreen {
                        index,
                        path: ref_image_path.clone(),
                    });
                }
            }
        }
        Ok(Self {
            task_id: task_id.into(),
            steps,
            screens,
        })
    }

    pub fn task_id(&self) -> &str {
        &self.task_id
    }

    pub fn steps(&self) -> &[IesStep] {
        &self.steps
    }

    pub fn screens(&self) -> &[String] {
        &self.screens
    }
}

pub fn parse_ies(text: &str) -> Result<IesScript, IesError> {
    let doc: Value = serde_yaml::from_str(text).map_err(|e| IesError::Syntax(e.to_string()))?;
    let top = doc
        .as_mapping()
        .ok_or_else(|| IesError::Syntax("top level must be a mapping".into()))?;
    let ctx = "script";
    let task_id = req_str(top, "task_id", ctx)?;
    let screens = match top.get("screens") {
        None | Some(Value::Null) => Vec::new(),
        Some(Value::Sequence(items)) => items
            .iter()
            .map(|v| {
                v.as_str().map(str::to_owned).ok_or_else(|| IesError::InvalidField {
                    context: ctx.into(),
                    field: "screens".into(),
                    reason: "entries must be strings".into(),
                })
            })
            .collect::<Result<_, _>>()?,
        Some(_) => return Err(invalid(ctx, "screens", "must be a list")),
    };
    let steps = match top.get("steps") {
        None => return Err(missing(ctx, "steps")),
        Some(Value::Sequence(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| parse_step(i, v))
            .collect::<Result<Vec<_>, _>>()?,
        Some(_) => return Err(invalid(ctx, "steps", "must be a list")),
    };
    IesScript::new(task_id, steps, screens)
}

fn parse_step(index: usize, value: &Value) -> Result<IesStep, IesError> {
    let ctx = format!("step {index}");
    let map = value
        .as_mapping()
        .filter(|m| m.len() == 1)
        .ok_or_else(|| IesError::Syntax(format!("{ctx}: each step must be a single-key mapping")))?;
    let (key, body) = map.iter().next().expect("len checked");
    let key = key
        .as_str()
        .ok_or_else(|| IesError::Syntax(format!("{ctx}: step key must be a string")))?;
    let kind = StepKind::from_key(key).ok_or_else(|| IesError::UnknownOp {
        index,
        kind: key.to_owned(),
    })?;
    let body = body
        .as_mapping()
        .ok_or_else(|| IesError::Syntax(format!("{ctx}: `{key}` body must be a mapping")))?;

    let step = match kind {
        StepKind::AssertElement => IesStep::AssertElement {
            selector: parse_selector(body, &ctx)?,
        },
        StepKind::AssertColor => IesStep::AssertColor {
            selector: parse_selector(body, &ctx)?,
            expected: parse_rgb(body, &ctx)?,
        },
        StepKind::AssertLayout => IesStep::AssertLayout {
            page_id: req_str(body, "page", &ctx)?,
            ref_image_path: req_str(body, "ref", &ctx)?,
        },
        StepKind::Click => IesStep::Click {
            selector: parse_selector(body, &ctx)?,
        },
        StepKind::InputText => IesStep::InputText {
            selector: parse_selector(body, &ctx)?,
            text: req_str(body, "text", &ctx)?,
        },
        StepKind::SelectDropdown => IesStep::SelectDropdown {
            selector: parse_selector(body, &ctx)?,
            option: req_str(body, "option", &ctx)?,
        },
    };
    Ok(step)
}

fn parse_selector(map: &Mapping, ctx: &str) -> Result<Selector, IesError> {
    let name = req_str(map, "name", ctx)?;
    if name.is_empty() {
        return Err(invalid(ctx, "name", "must be non-empty"));
    }
    let role = match map.get("role") {
        None | Some(Value::Null) => None,
        Some(v) => Some(scalar_string(v).ok_or_else(|| invalid(ctx, "role", "must be a string"))?),
    };
    let nth = match map.get("nth") {
        None | Some(Value::Null) => 0,
        Some(v) => v
            .as_u64()
            .and_then(|n| usize::try_from(n).ok())
            .ok_or_else(|| invalid(ctx, "nth", "must be a non-negative integer"))?,
    };
    Ok(Selector { role, name, nth })
}

fn parse_rgb(map: &Mapping, ctx: &str) -> Result<Rgb, IesError> {
    let seq = match map.get("rgb") {
        None => return Err(missing(ctx, "rgb")),
        Some(Value::Sequence(s)) if s.len() == 3 => s,
        Some(_) => return Err(invalid(ctx, "rgb", "must be a list of three integers")),
    };
    let mut ch = [0u8; 3];
    for (slot, v) in ch.iter_mut().zip(seq) {
        *slot = v
            .as_u64()
            .and_then(|n| u8::try_from(n).ok())
            .ok_or_else(|| invalid(ctx, "rgb", "channels must be integers in [0, 255]"))?;
    }
    Ok(Rgb::from(ch))
}

/// Accepts YAML scalars (so `name: 42` reads as "42").
fn scalar_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

fn req_str(map: &Mapping, field: &str, ctx: &str) -> Result<String, IesError> {
    match map.get(field) {
        None | Some(Value::Null) => Err(missing(ctx, field)),
        Some(v) => scalar_string(v).ok_or_else(|| invalid(ctx, field, "must be a string")),
    }
}

fn missing(ctx: &str, field: &str) -> IesError {
    IesError::MissingField {
        context: ctx.into(),
        field: field.into(),
    }
}

fn invalid(ctx: &str, field: &str, reason: &str) -> IesError {
    IesError::InvalidField {
        context: ctx.into(),
        field: field.into(),
        reason: reason.into(),
    }
}

pub fn serialize_ies(script: &IesScript) -> String {
    let mut top = Mapping::new();
    top.insert("task_id".into(), script.task_id.clone().into());
    top.insert(
        "screens".into(),
        Value::Sequence(script.screens.iter().cloned().map(Value::from).collect()),
    );
    let steps = script.steps.iter().map(step_value).collect();
    top.insert("steps".into(), Value::Sequence(steps));
    serde_yaml::to_string(&Value::Mapping(top)).expect("yaml values always serialize")
}

fn selector_body(sel: &Selector) -> Mapping {
    let mut m = Mapping::new();
    m.insert("name".into(), sel.name.clone().into());
    if let Some(role) = &sel.role {
        m.insert("role".into(), role.clone().into());
    }
    if sel.nth > 0 {
        m.insert("nth".into(), (sel.nth as u64).into());
    }
    m
}

fn step_value(step: &IesStep) -> Value {
    let body = match step {
        IesStep::AssertElement { selector } | IesStep::Click { selector } => selector_body(selector),
        IesStep::AssertColor { selector, expected } => {
            let mut m = selector_body(selector);
            let rgb = [expected.r, expected.g, expected.b]
                .into_iter()
                .map(|c| Value::from(u64::from(c)))
                .collect();
            m.insert("rgb".into(), Value::Sequence(rgb));
            m
        }
        IesStep::AssertLayout {
            page_id,
            ref_image_path,
        } => {
            let mut m = Mapping::new();
            m.insert("page".into(), page_id.clone().into());
            m.insert("ref".into(), ref_image_path.clone().into());
            m
        }
        IesStep::InputText { selector, text } => {
            let mut m = selector_body(selector);
            m.insert("text".into(), text.clone().into());
            m
        }
        IesStep::SelectDropdown { selector, option } => {
            let mut m = selector_body(selector);
            m.insert("option".into(), option.clone().into());
            m
        }
    };
    let mut outer = Mapping::new();
    outer.insert(step.kind().key().into(), Value::Mapping(body));
    Value::Mapping(outer)
}

// ---------------------------------------------------------------------------
// Task metadata and consistency validation

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub name: String,
    pub role: String,
    #[serde(rename = "page")]
    pub page_id: String,
    pub navigation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskMetadata {
    pub instruction: String,
    pub pages: Vec<String>,
    pub components: Vec<Component>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MetadataError {
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("component `{name}` appears twice on page `{page}`")]
    DuplicateComponent { name: String, page: String },
    #[error("component `{name}` references unknown page `{page}`")]
    UnknownPage { name: String, page: String },
}

impl TaskMetadata {
    pub fn parse(text: &str) -> Result<Self, MetadataError> {
        let meta: TaskMetadata =
            serde_yaml::from_str(text).map_err(|e| MetadataError::Syntax(e.to_string()))?;
        meta.check()?;
        Ok(meta)
    }

    pub fn check(&self) -> Result<(), MetadataError> {
        let mut seen = BTreeSet::new();
        for c in &self.components {
            if !self.pages.contains(&c.page_id) {
                return Err(MetadataError::UnknownPage {
                    name: c.name.clone(),
                    page: c.page_id.clone(),
                });
            }
            if !seen.insert((c.page_id.as_str(), c.name.as_str())) {
                return Err(MetadataError::DuplicateComponent {
                    name: c.name.clone(),
                    page: c.page_id.clone(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FindingKind {
    /// No metadata component carries the selector's name (and role).
    UnresolvableSelector,
    /// Resolved only after whitespace/case normalization.
    FallbackMatch,
    /// Interaction on a non-navigable component followed by an assertion
    /// about a different page.
    InteractionOnNonNavigable,
    /// Layout assertion names a page absent from the metadata.
    UnknownPage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub step: usize,
    pub kind: FindingKind,
    pub severity: Severity,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.findings.is_empty()
    }

    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }
}

struct Resolution<'a> {
    matches: Vec<&'a Component>,
    fallback: bool,
}

/// Selector resolution against metadata: exact case-sensitive name first,
/// then normalized name. Any page counts.
fn resolve<'a>(sel: &Selector, meta: &'a TaskMetadata) -> Resolution<'a> {
    let role_ok = |c: &Component| sel.role.as_ref().is_none_or(|r| *r == c.role);
    let exact: Vec<_> = meta
        .components
        .iter()
        .filter(|c| c.name == sel.name && role_ok(c))
        .collect();
    if !exact.is_empty() {
        return Resolution {
            matches: exact,
            fallback: false,
        };
    }
    let wanted = normalize_name(&sel.name);
    let loose: Vec<_> = meta
        .components
        .iter()
        .filter(|c| normalize_name(&c.name) == wanted && role_ok(c))
        .collect();
    Resolution {
        fallback: !loose.is_empty(),
        matches: loose,
    }
}

/// Pages the step expects to be showing, if it says anything about pages.
fn asserted_pages(step: &IesStep, meta: &TaskMetadata) -> Option<BTreeSet<String>> {
    match step {
        IesStep::AssertLayout { page_id, .. } => Some(BTreeSet::from([page_id.clone()])),
        IesStep::AssertElement { selector } => {
            let res = resolve(selector, meta);
            (!res.matches.is_empty()).then(|| res.matches.iter().map(|c| c.page_id.clone()).collect())
        }
        _ => None,
    }
}

pub fn validate_against_metadata(script: &IesScript, meta: &TaskMetadata) -> ValidationReport {
    let mut findings = Vec::new();
    let steps = script.steps();
    for (i, step) in steps.iter().enumerate() {
        if let Some(sel) = step.selector() {
            let res = resolve(sel, meta);
            if res.matches.is_empty() {
                findings.push(Finding {
                    step: i,
                    kind: FindingKind::UnresolvableSelector,
                    severity: Severity::Error,
                    message: format!("{} {sel} matches no metadata component", step.kind()),
                });
                continue;
            }
            if res.fallback {
                findings.push(Finding {
                    step: i,
                    kind: FindingKind::FallbackMatch,
                    severity: Severity::Warning,
                    message: format!("{sel} matched `{}` only after normalization", res.matches[0].name),
                });
            }
            if step.kind().is_interaction() && res.matches.iter().all(|c| !c.navigation) {
                let here: BTreeSet<_> = res.matches.iter().map(|c| c.page_id.clone()).collect();
                if let Some(next) = steps.get(i + 1).and_then(|s| asserted_pages(s, meta)) {
                    if here.is_disjoint(&next) {
                        findings.push(Finding {
                            step: i,
                            kind: FindingKind::InteractionOnNonNavigable,
                            severity: Severity::Error,
                            message: format!(
                                "{} on non-navigable {sel} is followed by an assertion on page(s) {}",
                                step.kind(),
                                next.into_iter().collect::<Vec<_>>().join(", ")
                            ),
                        });
                    }
                }
            }
        } else if let IesStep::AssertLayout { page_id, .. } = step {
            if !meta.pages.contains(page_id) {
                findings.push(Finding {
                    step: i,
                    kind: FindingKind::UnknownPage,
                    severity: Severity::Error,
                    message: format!("layout page `{page_id}` is not declared in metadata"),
                });
            }
        }
    }
    ValidationReport { findings }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TaskMetadata {
        TaskMetadata::parse(
            r#"
instruction: "A downloader with a settings page"
pages: [main, settings]
components:
  - {name: Download, role: button, page: main, navigation: false}
  - {name: Settings, role: button, page: main, navigation: true}
  - {name: Dark mode, role: check_box, page: settings, navigation: false}
"#,
        )
        .unwrap()
    }

    #[test]
    fn single_click_step() {
        let s = parse_ies("task_id: t\nsteps:\n  - click: {name: \"Download\"}\n").unwrap();
        assert_eq!(s.steps().len(), 1);
        assert_eq!(
            s.steps()[0],
            IesStep::Click {
                selector: Selector::named("Download")
            }
        );
    }

    #[test]
    fn unknown_op_is_rejected() {
        let err = parse_ies("task_id: t\nsteps:\n  - hover: {name: x}\n").unwrap_err();
        assert_eq!(
            err,
            IesError::UnknownOp {
                index: 0,
                kind: "hover".into()
            }
        );
    }

    #[test]
    fn missing_fields_are_reported() {
        let err = parse_ies("steps:\n  - click: {name: x}\n").unwrap_err();
        assert!(matches!(err, IesError::MissingField { ref field, .. } if field == "task_id"));
        let err = parse_ies("task_id: t\nsteps:\n  - input_text: {name: x}\n").unwrap_err();
        assert!(matches!(err, IesError::MissingField { ref field, .. } if field == "text"));
        let err = parse_ies("task_id: t\nsteps:\n  - assert_color: {name: x}\n").unwrap_err();
        assert!(matches!(err, IesError::MissingField { ref field, .. } if field == "rgb"));
    }

    #[test]
    fn malformed_documents() {
        assert!(matches!(parse_ies("task_id: [unclosed"), Err(IesError::Syntax(_))));
        assert!(matches!(parse_ies("- a\n- b\n"), Err(IesError::Syntax(_))));
        assert!(matches!(
            parse_ies("task_id: t\nsteps:\n  - {click: {name: a}, input_text: {name: b, text: c}}\n"),
            Err(IesError::Syntax(_))
        ));
        assert!(matches!(
            parse_ies("task_id: t\nsteps:\n  - assert_color: {name: x, rgb: [0, 300, 0]}\n"),
            Err(IesError::InvalidField { .. })
        ));
        assert!(matches!(
            parse_ies("task_id: t\nsteps:\n  - click: {name: x, nth: -1}\n"),
            Err(IesError::InvalidField { .. })
        ));
    }

    #[test]
    fn empty_steps_never_construct() {
        assert_eq!(IesScript::new("t", vec![], vec![]), Err(IesError::EmptySteps));
        assert_eq!(parse_ies("task_id: t\nsteps: []\n"), Err(IesError::EmptySteps));
    }

    #[test]
    fn layout_refs_must_be_listed() {
        let doc = "task_id: t\nscreens: [a.png]\nsteps:\n  - assert_layout: {page: main, ref: b.png}\n";
        assert!(matches!(parse_ies(doc), Err(IesError::UnlistedScreen { index: 0, .. })));
    }

    #[test]
    fn input_text_may_be_empty() {
        let s = parse_ies("task_id: t\nsteps:\n  - input_text: {name: q, text: \"\"}\n").unwrap();
        let back = parse_ies(&serialize_ies(&s)).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn one_step_round_trip() {
        let s = IesScript::new(
            "t1",
            vec![IesStep::AssertColor {
                selector: Selector::named("yes").with_role("button").with_nth(2),
                expected: Rgb::new(0, 122, 255),
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(parse_ies(&serialize_ies(&s)).unwrap(), s);
    }

    #[test]
    fn navigable_click_is_clean() {
        let s = parse_ies(
            "task_id: t\nscreens: [s.png]\nsteps:\n  - click: {name: Settings}\n  - assert_layout: {page: settings, ref: s.png}\n",
        )
        .unwrap();
        assert!(validate_against_metadata(&s, &meta()).is_valid());
    }

    #[test]
    fn non_navigable_click_before_page_change() {
        let s = parse_ies(
            "task_id: t\nscreens: [s.png]\nsteps:\n  - click: {name: Download}\n  - assert_layout: {page: settings, ref: s.png}\n",
        )
        .unwrap();
        let r = validate_against_metadata(&s, &meta());
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].kind, FindingKind::InteractionOnNonNavigable);
        assert!(r.has_errors());
    }

    #[test]
    fn page_change_inferred_from_element_assertion() {
        let s = parse_ies(
            "task_id: t\nsteps:\n  - click: {name: Download}\n  - assert_element: {name: Dark mode}\n",
        )
        .unwrap();
        let r = validate_against_metadata(&s, &meta());
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].kind, FindingKind::InteractionOnNonNavigable);
    }

    #[test]
    fn misspelled_selector_is_unresolvable() {
        let s = parse_ies("task_id: t\nsteps:\n  - assert_element: {name: Downlaod}\n").unwrap();
        let r = validate_against_metadata(&s, &meta());
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].kind, FindingKind::UnresolvableSelector);
    }

    #[test]
    fn normalized_match_is_a_warning() {
        let s = parse_ies("task_id: t\nsteps:\n  - assert_element: {name: \"  dark   MODE \"}\n").unwrap();
        let r = validate_against_metadata(&s, &meta());
        assert_eq!(r.findings.len(), 1);
        assert_eq!(r.findings[0].kind, FindingKind::FallbackMatch);
        assert_eq!(r.findings[0].severity, Severity::Warning);
        assert!(!r.has_errors());
    }

    #[test]
    fn unknown_layout_page() {
        let s = parse_ies(
            "task_id: t\nscreens: [x.png]\nsteps:\n  - assert_layout: {page: about, ref: x.png}\n",
        )
        .unwrap();
        let r = validate_against_metadata(&s, &meta());
        assert_eq!(r.findings[0].kind, FindingKind::UnknownPage);
    }

    #[test]
    fn metadata_invariants() {
        let dup = "instruction: x\npages: [a]\ncomponents:\n  - {name: n, role: r, page: a, navigation: true}\n  - {name: n, role: r, page: a, navigation: false}\n";
        assert!(matches!(TaskMetadata::parse(dup), Err(MetadataError::DuplicateComponent { .. })));
        let ghost = "instruction: x\npages: [a]\ncomponents:\n  - {name: n, role: r, page: b, navigation: true}\n";
        assert!(matches!(TaskMetadata::parse(ghost), Err(MetadataError::UnknownPage { .. })));
    }
}
