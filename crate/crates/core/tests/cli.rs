mod common;

use std::io::Write;
use std::path::Path;
use std::process::{Command, Stdio};

use guiprobe::cli::{run, EXIT_FAILED, EXIT_OK, EXIT_USAGE};

fn cli(args: &[&str]) -> i32 {
    run(std::iter::once("guiprobe").chain(args.iter().copied()))
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn trace_events(path: &Path) -> Vec<serde_json::Value> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn of<'a>(events: &'a [serde_json::Value], actor: &'a str, event: &'a str) -> impl Iterator<Item = &'a serde_json::Value> {
    events.iter().filter(move |e| e["actor"] == actor && e["event"] == event)
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let task = common::write_task(dir.path(), 0);
    assert_eq!(cli(&["validate", p(&task.join("ies.yaml")), p(&task.join("meta.yaml"))]), EXIT_OK);

    let bad = dir.path().join("bad.yaml");
    std::fs::write(&bad, "task_id: x\nsteps:\n  - click: {name: Nowhere}\n").unwrap();
    assert_eq!(cli(&["validate", p(&bad), p(&task.join("meta.yaml"))]), EXIT_FAILED);

    let broken = dir.path().join("broken.yaml");
    std::fs::write(&broken, "task_id: x\nsteps:\n  - hover: {name: Save}\n").unwrap();
    assert_eq!(cli(&["validate", p(&broken), p(&task.join("meta.yaml"))]), EXIT_USAGE);
    assert_eq!(cli(&["validate", p(&dir.path().join("nope.yaml")), p(&task.join("meta.yaml"))]), EXIT_USAGE);
    assert_eq!(cli(&["frobnicate"]), EXIT_USAGE);
}

#[test]
fn run_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    for i in 0..3 {
        common::write_task(&suite, i);
    }
    let out = dir.path().join("out");
    assert_eq!(cli(&["run", p(&suite), "--out", p(&out), "--workers", "2"]), EXIT_OK);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("suite.json")).unwrap()).unwrap();
    assert_eq!(report["suite"]["n_tasks"], 3);
    for i in 0..3 {
        assert!(out.join(format!("tasks/app{i}.json")).is_file());
    }
    assert!(out.join("suite.csv").is_file());

    assert_eq!(cli(&["run", p(&dir.path().join("missing")), "--out", p(&out)]), EXIT_USAGE);
    assert_eq!(cli(&["run", p(&suite), "--out", p(&out), "--layout-gate", "1.5"]), EXIT_USAGE);
    assert_eq!(cli(&["run", p(&suite), "--out", p(&out), "--scorer", "sidecar"]), EXIT_USAGE);
}

#[test]
fn run_with_sidecar_scorer_matches_grid() {
    let dir = tempfile::tempdir().unwrap();
    let suite = dir.path().join("suite");
    common::write_task(&suite, 0);
    let grid_out = dir.path().join("grid");
    let side_out = dir.path().join("side");
    assert_eq!(cli(&["run", p(&suite), "--out", p(&grid_out)]), EXIT_OK);
    let cmd = format!("{} sidecar", env!("CARGO_BIN_EXE_guiprobe"));
    assert_eq!(
        cli(&["run", p(&suite), "--out", p(&side_out), "--scorer", "sidecar", "--sidecar-cmd", &cmd]),
        EXIT_OK
    );
    assert_eq!(
        std::fs::read(grid_out.join("suite.json")).unwrap(),
        std::fs::read(side_out.join("suite.json")).unwrap()
    );
}

#[test]
fn sidecar_binary_answers_requests() {
    let mut child = Command::new(env!("CARGO_BIN_EXE_guiprobe"))
        .arg("sidecar")
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .spawn()
        .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let png = dir.path().join("a.png");
    guiprobe::raster::RasterImage::filled(8, 8, guiprobe::raster::Rgb::new(10, 20, 30))
        .save_png(&png)
        .unwrap();
    let req = serde_json::json!({"ref": p(&png), "gen": p(&png)});
    {
        let mut stdin = child.stdin.take().unwrap();
        writeln!(stdin, "{req}").unwrap();
        writeln!(stdin, "not json").unwrap();
    }
    let out = child.wait_with_output().unwrap();
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = String::from_utf8(out.stdout)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 2);
    assert!((lines[0]["score"].as_f64().unwrap() - 1.0).abs() < 1e-9);
    assert!(lines[1]["error"].is_string());
}

#[test]
fn corpus_counts_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(cli(&["corpus", "--synth", "10", "--seed", "3", "--out", p(&a)]), EXIT_OK);
    assert_eq!(cli(&["corpus", "--synth", "10", "--seed", "3", "--out", p(&b)]), EXIT_OK);
    let manifest = std::fs::read_to_string(a.join("manifest.jsonl")).unwrap();
    assert_eq!(manifest, std::fs::read_to_string(b.join("manifest.jsonl")).unwrap());
    let labels: Vec<f64> = manifest
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["label"].as_f64().unwrap())
        .collect();
    assert_eq!(labels.len(), 100);
    assert_eq!(labels.iter().filter(|&&l| l == 1.0).count(), 30);
    assert_eq!(labels.iter().filter(|&&l| l == 0.0).count(), 20);
    assert_eq!(labels.iter().filter(|&&l| l > 0.0 && l < 1.0).count(), 50);

    let pages = dir.path().join("pages");
    std::fs::create_dir_all(&pages).unwrap();
    std::fs::write(pages.join("only.json"), common::fixed_app(0).to_json()).unwrap();
    assert_eq!(cli(&["corpus", p(&pages), "--out", p(&dir.path().join("c"))]), EXIT_USAGE);
    std::fs::write(pages.join("second.json"), common::fixed_app(1).to_json()).unwrap();
    assert_eq!(cli(&["corpus", p(&pages), "--out", p(&dir.path().join("c"))]), EXIT_OK);
}

fn debug_task(root: &Path, i: usize, ablation: &str) -> (i32, Vec<serde_json::Value>) {
    let task = common::write_task(root, i);
    let cfg = common::write_reasoner(&root.join("reasoner"), i);
    let instruction = root.join("instruction.txt");
    std::fs::write(&instruction, common::instruction(i)).unwrap();
    let trace = root.join("trace.jsonl");
    let code = cli(&[
        "debug",
        p(&task),
        &format!("@{}", p(&instruction)),
        p(&task.join("screens")),
        "--reasoner",
        p(&cfg),
        "--ablation",
        ablation,
        "--trace",
        p(&trace),
    ]);
    (code, trace_events(&trace))
}

#[test]
fn debug_repairs_wrong_fill() {
    let dir = tempfile::tempdir().unwrap();
    let (code, events) = debug_task(dir.path(), 0, "none");
    assert_eq!(code, EXIT_OK);
    let agents: Vec<&str> = of(&events, "planner", "dispatch")
        .map(|e| e["payload"]["agent"].as_str().unwrap())
        .collect();
    assert_eq!(agents, ["operator", "fixer", "operator"]);
    let fixer_call = of(&events, "fixer", "reasoner_call").next().unwrap();
    assert_eq!(fixer_call["payload"]["context"]["images"], 1);
    let last = events.last().unwrap();
    assert_eq!(last["event"], "terminate");
    assert_eq!(last["payload"]["normal"], true);
}

#[test]
fn debug_no_bug_screenshot_withholds_images_from_fixer() {
    let dir = tempfile::tempdir().unwrap();
    let (code, events) = debug_task(dir.path(), 0, "no-bug-screenshot");
    assert_eq!(code, EXIT_OK);
    let calls: Vec<_> = of(&events, "fixer", "reasoner_call").collect();
    assert!(!calls.is_empty());
    assert!(calls.iter().all(|c| c["payload"]["context"]["images"] == 0));
}

#[test]
fn debug_no_operator_never_dispatches_the_gui_operator() {
    let dir = tempfile::tempdir().unwrap();
    let (_, events) = debug_task(dir.path(), 0, "no-operator");
    assert!(of(&events, "planner", "dispatch").all(|e| e["payload"]["agent"] != "operator"));
    assert!(of(&events, "planner", "dispatch").any(|e| e["payload"]["agent"] == "text_check"));
    assert!(of(&events, "operator", "env_call").next().is_none());
    assert!(events
        .iter()
        .filter(|e| e["event"] == "reasoner_call")
        .all(|e| e["payload"]["context"]["images"] == 0));
}

#[test]
fn debug_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let task = common::write_task(dir.path(), 0);
    let screens = task.join("screens");
    assert_eq!(
        cli(&["debug", p(&dir.path().join("none")), "x", p(&screens), "--reasoner", "r.toml"]),
        EXIT_USAGE
    );
    assert_eq!(
        cli(&["debug", p(&task), "x", p(&screens), "--reasoner", p(&dir.path().join("r.toml"))]),
        EXIT_USAGE
    );
    let cfg = common::write_reasoner(&dir.path().join("reasoner"), 0);
    assert_eq!(
        cli(&["debug", p(&task), "x", p(&screens), "--reasoner", p(&cfg), "--ablation", "sideways"]),
        EXIT_USAGE
    );
    assert_eq!(
        cli(&["debug", p(&task), "x", p(&screens), "--reasoner", p(&cfg), "--planner-max", "0"]),
        EXIT_USAGE
    );
}
