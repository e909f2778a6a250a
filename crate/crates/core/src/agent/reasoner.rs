//! Reasoner implementations: an offline rule table and an HTTP endpoint.

use std::path::{Path, PathBuf};
use std::time::Duration;

use base64::Engine;
use regex::Regex;
use serde::{Deserialize, Serialize};

use super::run::Reasoners;
use super::{Context, ContextEntry, Decision, DecisionKind, Reasoner, ReasonerError, Role};
use crate::eval::Usage;

/// `decision` applies when `when` matches the context text (or is absent)
/// and `unless` does not match.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub when: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unless: Option<String>,
    pub decision: Decision,
}

impl Rule {
    pub fn new(decision: Decision) -> Self {
        Self {
            when: None,
            unless: None,
            decision,
        }
    }

    pub fn when(mut self, pattern: impl Into<String>) -> Self {
        self.when = Some(pattern.into());
        self
    }

    pub fn unless(mut self, pattern: impl Into<String>) -> Self {
        self.unless = Some(pattern.into());
        self
    }
}

/// Rule tables per role. A missing planner table means
/// [`default_planner_rules`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleFile {
    #[serde(default)]
    pub planner: Option<Vec<Rule>>,
    #[serde(default)]
    pub operator: Vec<Rule>,
    #[serde(default)]
    pub fixer: Vec<Rule>,
}

impl RuleFile {
    pub fn parse(yaml: &str) -> Result<Self, ReasonerError> {
        serde_yaml::from_str(yaml).map_err(|e| ReasonerError::Config(format!("rule file: {e}")))
    }

    pub fn into_reasoners(self) -> Result<Reasoners, ReasonerError> {
        Ok(Reasoners {
            planner: Box::new(ScriptedReasoner::new(self.planner.unwrap_or_else(default_planner_rules))?),
            operator: Box::new(ScriptedReasoner::new(self.operator)?),
            fixer: Box::new(ScriptedReasoner::new(self.fixer)?),
        })
    }
}

fn plan(to: &str, why: &str) -> Decision {
    Decision {
        kind: DecisionKind::Plan,
        payload: Some(to.into()),
        report: Some(why.into()),
        ..Decision::finish()
    }
}

/// Bug reports go to the fixer, a clean inspection ends the loop, anything
/// else (start, patch, failed fix) asks the operator to inspect again.
pub fn default_planner_rules() -> Vec<Rule> {
    vec![
        Rule::new(plan("fixer", "repair the reported defect")).when(r"(?m)^feedback:\nbug_report"),
        Rule::new(Decision::finish()).when(r"(?m)^feedback:\noperator_ok"),
        Rule::new(plan("operator", "inspect the application against the instruction")),
    ]
}

struct CompiledRule {
    when: Option<Regex>,
    unless: Option<Regex>,
    decision: Decision,
}

/// First-match rule table; falls back to `finish`. Reports zero usage.
pub struct ScriptedReasoner {
    rules: Vec<CompiledRule>,
}

impl ScriptedReasoner {
    pub fn new(rules: Vec<Rule>) -> Result<Self, ReasonerError> {
        let compile = |p: &Option<String>| -> Result<Option<Regex>, ReasonerError> {
            p.as_deref()
                .map(|s| Regex::new(s).map_err(|e| ReasonerError::Config(format!("pattern {s:?}: {e}"))))
                .transpose()
        };
        let rules = rules
            .into_iter()
            .map(|r| {
                r.decision.validate()?;
                Ok(CompiledRule {
                    when: compile(&r.when)?,
                    unless: compile(&r.unless)?,
                    decision: r.decision,
                })
            })
            .collect::<Result<Vec<_>, ReasonerError>>()?;
        Ok(Self { rules })
    }
}

impl Reasoner for ScriptedReasoner {
    fn propose(&mut self, context: &Context) -> Result<(Decision, Usage), ReasonerError> {
        let text = context.render_text();
        let decision = self
            .rules
            .iter()
            .find(|r| {
                r.when.as_ref().is_none_or(|re| re.is_match(&text))
                    && !r.unless.as_ref().is_some_and(|re| re.is_match(&text))
            })
            .map_or_else(Decision::finish, |r| r.decision.clone());
        Ok((decision, Usage::default()))
    }

    fn model_name(&self) -> &str {
        "scripted"
    }
}

#[derive(Serialize)]
struct RemoteRequest<'a> {
    model: &'a str,
    role: Role,
    context: Vec<serde_json::Value>,
}

#[derive(Deserialize)]
struct RemoteResponse {
    decision: Decision,
    #[serde(default)]
    usage: Usage,
}

/// Posts `{model, role, context}` to an endpoint that answers
/// `{decision, usage}`. Images travel as base64 PNG.
pub struct RemoteReasoner {
    endpoint_url: String,
    api_key_env: String,
    model_name: String,
    agent: ureq::Agent,
}

impl RemoteReasoner {
    pub fn new(endpoint_url: impl Into<String>, api_key_env: impl Into<String>, model_name: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(120)))
            .http_status_as_error(false)
            .build()
            .new_agent();
        Self {
            endpoint_url: endpoint_url.into(),
            api_key_env: api_key_env.into(),
            model_name: model_name.into(),
            agent,
        }
    }

    fn encode(context: &Context) -> Result<Vec<serde_json::Value>, ReasonerError> {
        context
            .entries
            .iter()
            .map(|e| match e {
                ContextEntry::Text { label, text } => Ok(serde_json::json!({"type": "text", "label": label, "text": text})),
                ContextEntry::Image { label, image } => {
                    let png = image.encode_png().map_err(|e| ReasonerError::Transport(e.to_string()))?;
                    Ok(serde_json::json!({
                        "type": "image",
                        "label": label,
                        "png_base64": base64::engine::general_purpose::STANDARD.encode(png),
                    }))
                }
            })
            .collect()
    }
}

impl Reasoner for RemoteReasoner {
    fn propose(&mut self, context: &Context) -> Result<(Decision, Usage), ReasonerError> {
        let key = std::env::var(&self.api_key_env)
            .map_err(|_| ReasonerError::Config(format!("environment variable {} is not set", self.api_key_env)))?;
        let body = RemoteRequest {
            model: &self.model_name,
            role: context.role,
            context: Self::encode(context)?,
        };
        let mut resp = self
            .agent
            .post(&self.endpoint_url)
            .header("Authorization", &format!("Bearer {key}"))
            .send_json(&body)
            .map_err(|e| ReasonerError::Transport(e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            return Err(ReasonerError::Transport(format!("endpoint returned {status}")));
        }
        let parsed: RemoteResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| ReasonerError::Malformed(e.to_string()))?;
        parsed.decision.validate()?;
        Ok((parsed.decision, parsed.usage))
    }

    fn model_name(&self) -> &str {
        &self.model_name
    }
}

/// Reasoner endpoint configuration file (TOML).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReasonerConfig {
    Scripted {
        rules_path: PathBuf,
    },
    Remote {
        endpoint_url: String,
        api_key_env: String,
        model_name: String,
    },
}

impl ReasonerConfig {
    /// Relative rule paths resolve against `base`.
    pub fn build(&self, base: &Path) -> Result<Reasoners, ReasonerError> {
        match self {
            ReasonerConfig::Scripted { rules_path } => {
                let path = base.join(rules_path);
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ReasonerError::Config(format!("{}: {e}", path.display())))?;
                RuleFile::parse(&text)?.into_reasoners()
            }
            ReasonerConfig::Remote {
                endpoint_url,
                api_key_env,
                model_name,
            } => {
                let make = || Box::new(RemoteReasoner::new(endpoint_url, api_key_env, model_name));
                Ok(Reasoners {
                    planner: make(),
                    operator: make(),
                    fixer: make(),
                })
            }
        }
    }
}

pub fn load_reasoner_config(path: &Path) -> Result<ReasonerConfig, ReasonerError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| ReasonerError::Config(format!("{}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| ReasonerError::Config(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use std::io::{BufRead, BufReader, Read, Write};
    use std::net::TcpListener;

    use super::*;

    fn ctx(role: Role, text: &str) -> Context {
        let mut c = Context::new(role);
        c.push(ContextEntry::text("feedback", text));
        c
    }

    #[test]
    fn first_match_wins_with_unless() {
        let report = |r: &str| Decision {
            kind: DecisionKind::ReportBug,
            report: Some(r.into()),
            ..Decision::finish()
        };
        let mut s = ScriptedReasoner::new(vec![
            Rule::new(report("first")).when("alpha").unless("beta"),
            Rule::new(report("second")).when("alpha"),
        ])
        .unwrap();
        assert_eq!(s.propose(&ctx(Role::Operator, "alpha")).unwrap().0.report.as_deref(), Some("first"));
        assert_eq!(s.propose(&ctx(Role::Operator, "alpha beta")).unwrap().0.report.as_deref(), Some("second"));
        let (d, u) = s.propose(&ctx(Role::Operator, "gamma")).unwrap();
        assert_eq!(d, Decision::finish());
        assert_eq!(u, Usage::default());
    }

    #[test]
    fn default_planner_policy() {
        let mut p = ScriptedReasoner::new(default_planner_rules()).unwrap();
        let decide = |p: &mut ScriptedReasoner, fb: &str| p.propose(&ctx(Role::Planner, fb)).unwrap().0;
        assert_eq!(decide(&mut p, "none").payload.as_deref(), Some("operator"));
        assert_eq!(decide(&mut p, "bug_report: wrong fill").payload.as_deref(), Some("fixer"));
        assert_eq!(decide(&mut p, "patch: edited app.json").payload.as_deref(), Some("operator"));
        assert_eq!(decide(&mut p, "fix_failed: no edit").payload.as_deref(), Some("operator"));
        assert_eq!(decide(&mut p, "operator_ok: looks right").kind, DecisionKind::Finish);
    }

    #[test]
    fn invalid_rules_are_config_errors() {
        assert!(matches!(
            ScriptedReasoner::new(vec![Rule::new(Decision::finish()).when("(")]),
            Err(ReasonerError::Config(_))
        ));
        let bad = Decision {
            kind: DecisionKind::Edit,
            ..Decision::finish()
        };
        assert!(matches!(ScriptedReasoner::new(vec![Rule::new(bad)]), Err(ReasonerError::Malformed(_))));
        assert!(RuleFile::parse("operator: [{decision: {type: jump}}]").is_err());
    }

    #[test]
    fn rule_file_yaml() {
        let f = RuleFile::parse(
            r#"
operator:
  - when: 'color #ff0000'
    decision: {type: report_bug, report: wrong fill on Save}
fixer:
  - when: wrong fill
    decision: {type: edit, edits: [{path: app.json, content: "{}"}]}
"#,
        )
        .unwrap();
        assert!(f.planner.is_none());
        assert_eq!(f.operator.len(), 1);
        let mut r = f.into_reasoners().unwrap();
        let (d, _) = r.operator.propose(&ctx(Role::Operator, "Save color #ff0000")).unwrap();
        assert_eq!(d.kind, DecisionKind::ReportBug);
    }

    fn serve_once(reply: &'static str) -> (String, std::thread::JoinHandle<String>) {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}/decide", listener.local_addr().unwrap());
        let handle = std::thread::spawn(move || {
            let (mut stream, _) = listener.accept().unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut head = String::new();
            let mut len = 0;
            loop {
                let mut line = String::new();
                reader.read_line(&mut line).unwrap();
                if line == "\r\n" {
                    break;
                }
                if let Some(v) = line.to_ascii_lowercase().strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap();
                }
                head.push_str(&line);
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            write!(
                stream,
                "HTTP/1.1 200 OK\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{}",
                reply.len(),
                reply
            )
            .unwrap();
            head + "\n" + &String::from_utf8(body).unwrap()
        });
        (url, handle)
    }

    #[test]
    fn remote_round_trip() {
        std::env::set_var("GUIPROBE_TEST_KEY_A", "sekrit");
        let (url, server) = serve_once(
            r#"{"decision": {"type": "report_bug", "report": "x"}, "usage": {"prompt_tokens": 12, "completion_tokens": 3}}"#,
        );
        let mut r = RemoteReasoner::new(url, "GUIPROBE_TEST_KEY_A", "m1");
        let mut c = ctx(Role::Operator, "hello");
        c.push(ContextEntry::image("shot", crate::raster::RasterImage::filled(2, 2, crate::raster::Rgb::WHITE)));
        let (d, u) = r.propose(&c).unwrap();
        assert_eq!(d.kind, DecisionKind::ReportBug);
        assert_eq!(u.prompt_tokens, 12);
        let seen = server.join().unwrap();
        assert!(seen.to_ascii_lowercase().contains("authorization: bearer sekrit"));
        let body: serde_json::Value = serde_json::from_str(seen.split("\n\n").last().unwrap()).unwrap();
        assert_eq!(body["model"], "m1");
        assert_eq!(body["role"], "operator");
        assert_eq!(body["context"][1]["type"], "image");
        assert!(body["context"][1]["png_base64"].as_str().unwrap().len() > 10);
    }

    #[test]
    fn remote_malformed_decision() {
        std::env::set_var("GUIPROBE_TEST_KEY_B", "k");
        let (url, server) = serve_once(r#"{"decision": {"type": "edit"}}"#);
        let mut r = RemoteReasoner::new(url, "GUIPROBE_TEST_KEY_B", "m");
        assert!(matches!(r.propose(&ctx(Role::Fixer, "x")), Err(ReasonerError::Malformed(_))));
        server.join().unwrap();
    }

    #[test]
    fn remote_needs_key() {
        let mut r = RemoteReasoner::new("http://127.0.0.1:9/", "GUIPROBE_TEST_KEY_UNSET", "m");
        assert!(matches!(r.propose(&ctx(Role::Fixer, "x")), Err(ReasonerError::Config(_))));
    }

    #[test]
    fn config_toml() {
        let c: ReasonerConfig = toml::from_str("kind = \"scripted\"\nrules_path = \"rules.yaml\"\n").unwrap();
        assert_eq!(c, ReasonerConfig::Scripted { rules_path: "rules.yaml".into() });
        let r: ReasonerConfig = toml::from_str(
            "kind = \"remote\"\nendpoint_url = \"http://x\"\napi_key_env = \"KEY\"\nmodel_name = \"m\"\n",
        )
        .unwrap();
        assert!(matches!(r, ReasonerConfig::Remote { .. }));
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("rules.yaml"), "fixer: []\n").unwrap();
        assert!(c.build(dir.path()).is_ok());
        assert!(c.build(Path::new("/nonexistent")).is_err());
    }
}
