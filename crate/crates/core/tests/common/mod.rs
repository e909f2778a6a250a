//! Fault-seeded sim apps with matching scripted reasoners, shared by the
//! end-to-end tests.
#![allow(dead_code)]

use std::path::{Path, PathBuf};

use guiprobe::agent::{Decision, DecisionKind, FileEdit, InteractAction, Rule, RuleFile};
use guiprobe::ies::Selector;
use guiprobe::raster::Rgb;
use guiprobe::sim::{load_model, render_page, AppModel, FaultSpec};

pub const APPS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    WrongFill,
    MissingWidget,
    DeadTransition,
    OverlapShift,
}

pub fn fault_of(i: usize) -> Fault {
    match i % 4 {
        0 => Fault::WrongFill,
        1 => Fault::MissingWidget,
        2 => Fault::DeadTransition,
        _ => Fault::OverlapShift,
    }
}

struct W {
    page: &'static str,
    name: &'static str,
    role: &'static str,
    bounds: [u32; 4],
    fill: [u8; 3],
}

fn widgets(i: usize) -> Vec<W> {
    let k = (i as u8).wrapping_mul(17);
    vec![
        W { page: "main", name: "Header", role: "label", bounds: [0, 0, 320, 40], fill: [k, 90, 160] },
        W { page: "main", name: "Open", role: "button", bounds: [20, 60, 100, 40], fill: [0, 122, 255] },
        W { page: "main", name: "Save", role: "button", bounds: [200, 60, 100, 40], fill: [40, 170, k / 2] },
        W { page: "main", name: "Notes", role: "text", bounds: [20, 130, 280, 40], fill: [255, 255, 255] },
        W { page: "details", name: "Status", role: "label", bounds: [20, 20, 280, 40], fill: [250, 200, k / 3] },
        W { page: "details", name: "Back", role: "button", bounds: [20, 120, 100, 40], fill: [200, 60, 60] },
    ]
}

fn widget_json(w: &W) -> String {
    let actions = match w.role {
        "button" => r#"["click"]"#,
        "text" => r#"["set_text", "focus"]"#,
        _ => "[]",
    };
    format!(
        r#"{{"name": "{}", "role": "{}", "bounds": {:?}, "fill": {:?}, "actions": {actions}}}"#,
        w.name, w.role, w.bounds, w.fill
    )
}

/// The fault-free model of app `i`.
pub fn fixed_app(i: usize) -> AppModel {
    let ws = widgets(i);
    let page = |id: &str| {
        ws.iter()
            .filter(|w| w.page == id)
            .map(widget_json)
            .collect::<Vec<_>>()
            .join(",\n")
    };
    let doc = format!(
        r#"{{
  "initial_page": "main",
  "pages": {{
    "main": {{"canvas": [0, 0, 320, 200], "background": [240, 240, 240], "widgets": [{}]}},
    "details": {{"canvas": [0, 0, 320, 200], "background": [30, 30, 30], "widgets": [{}]}}
  }},
  "transitions": [
    {{"on": {{"name": "Open", "action": "click"}}, "effects": [{{"navigate": "details"}}]}},
    {{"on": {{"name": "Back", "action": "click"}}, "effects": [{{"navigate": "main"}}]}}
  ]
}}"#,
        page("main"),
        page("details")
    );
    load_model(&doc).expect("fixture model is valid")
}

pub fn faulted_app(i: usize) -> AppModel {
    let mut m = fixed_app(i);
    let save = Selector::named("Save");
    m.faults.push(match fault_of(i) {
        Fault::WrongFill => {
            let f = widgets(i)[2].fill;
            FaultSpec::WrongFill {
                target: save,
                rgb: Rgb::new(255 - f[0], 255 - f[1], 255 - f[2]),
            }
        }
        Fault::MissingWidget => FaultSpec::MissingWidget(save),
        Fault::DeadTransition => FaultSpec::DeadTransition(0),
        Fault::OverlapShift => FaultSpec::OverlapShift {
            target: save,
            dx: -180,
            dy: 0,
        },
    });
    m.validate().expect("faulted fixture is valid");
    m
}

pub fn instruction(i: usize) -> String {
    format!(
        "Build app{i}: a main page with a header, an Open button that shows the details page, \
         a Save button and a notes field; the details page has a status label and a Back button."
    )
}

pub fn ies(i: usize) -> String {
    let ws = widgets(i);
    let rgb = |name: &str| ws.iter().find(|w| w.name == name).unwrap().fill;
    format!(
        r#"task_id: app{i}
screens: [screens/main.png, screens/details.png]
steps:
  - assert_element: {{name: Save, role: button}}
  - assert_color: {{name: Save, rgb: {:?}}}
  - assert_color: {{name: Open, rgb: {:?}}}
  - assert_layout: {{page: main, ref: screens/main.png}}
  - click: {{name: Open}}
  - assert_element: {{name: Status}}
  - assert_color: {{name: Status, rgb: {:?}}}
  - assert_layout: {{page: details, ref: screens/details.png}}
"#,
        rgb("Save"),
        rgb("Open"),
        rgb("Status")
    )
}

pub fn meta(i: usize) -> String {
    let mut s = format!("instruction: \"{}\"\npages: [main, details]\ncomponents:\n", instruction(i));
    for w in widgets(i) {
        let nav = w.name == "Open" || w.name == "Back";
        s.push_str(&format!(
            "  - {{name: {}, role: {}, page: {}, navigation: {nav}}}\n",
            w.name, w.role, w.page
        ));
    }
    s
}

/// Writes task directory `root/app{i}` holding the faulted app.
pub fn write_task(root: &Path, i: usize) -> PathBuf {
    let dir = root.join(format!("app{i}"));
    std::fs::create_dir_all(dir.join("screens")).unwrap();
    std::fs::write(dir.join("ies.yaml"), ies(i)).unwrap();
    std::fs::write(dir.join("meta.yaml"), meta(i)).unwrap();
    std::fs::write(dir.join("app.json"), faulted_app(i).to_json()).unwrap();
    let fixed = fixed_app(i);
    for page in ["main", "details"] {
        render_page(&fixed.pages[page])
            .save_png(dir.join("screens").join(format!("{page}.png")))
            .unwrap();
    }
    dir
}

fn decision(kind: DecisionKind) -> Decision {
    Decision {
        kind,
        ..Decision::finish()
    }
}

fn report(text: String) -> Decision {
    Decision {
        report: Some(text),
        ..decision(DecisionKind::ReportBug)
    }
}

fn current(page: &str) -> String {
    format!(r"(?s)\nobservation:\npage: {page}\n")
}

/// Operator and fixer rule tables for app `i`. The operator compares the
/// current page against the fault-free layout, opens the details page, and
/// flags a click that leaves the main page showing. The fixer restores the
/// fault-free model.
pub fn rules(i: usize) -> RuleFile {
    let fixed = fixed_app(i);
    let mut operator = Vec::new();
    for w in widgets(i) {
        let line = format!(r#"\n- {} "{}"[ \n]"#, w.role, regex::escape(w.name));
        let [x, y, bw, bh] = w.bounds;
        let hex = Rgb::new(w.fill[0], w.fill[1], w.fill[2]).to_hex();
        operator.push(
            Rule::new(report(format!("{} is missing from the {} page", w.name, w.page)))
                .when(current(w.page))
                .unless(format!("{}.*{line}", current(w.page))),
        );
        operator.push(
            Rule::new(report(format!(
                "{} on the {} page should be at [{x},{y},{bw},{bh}] with fill {hex}",
                w.name, w.page
            )))
            .when(format!(r"{}.*{line}\[", current(w.page)))
            .unless(format!(
                r"{}.*{line}\[{x},{y},{bw},{bh}\] [a-z,]* color {}",
                current(w.page),
                regex::escape(&hex)
            )),
        );
    }
    operator.push(
        Rule::new(Decision {
            report: Some("main and details pages match the instruction".into()),
            ..decision(DecisionKind::Finish)
        })
        .when(current("details")),
    );
    operator.push(
        Rule::new(report("clicking Open does not show the details page".into()))
            .when(format!(r#"(?s)action: click "Open".*{}"#, current("main"))),
    );
    operator.push(
        Rule::new(Decision {
            target: Some(Selector::named("Open")),
            action: Some(InteractAction::Click),
            ..decision(DecisionKind::Interact)
        })
        .when(current("main")),
    );
    let fixer = vec![Rule::new(Decision {
        report: Some("restored the specified layout and transitions".into()),
        edits: Some(vec![FileEdit {
            path: "app.json".into(),
            content: fixed.to_json(),
        }]),
        ..decision(DecisionKind::Edit)
    })
    .when(r"(?m)^description: .*(missing|should be at|does not show)")];
    RuleFile {
        planner: None,
        operator,
        fixer,
    }
}

/// Writes `rules.yaml` and a scripted `reasoner.toml` into `dir`.
pub fn write_reasoner(dir: &Path, i: usize) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join("rules.yaml"), serde_yaml::to_string(&rules(i)).unwrap()).unwrap();
    let cfg = dir.join("reasoner.toml");
    std::fs::write(&cfg, "kind = \"scripted\"\nrules_path = \"rules.yaml\"\n").unwrap();
    cfg
}
