//! Command-line front end. Exit codes: 0 success, 1 validation or loop
//! failure, 2 usage, configuration or structure errors.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::agent::{load_reasoner_config, run_debug_loop, Ablation, DebugConfig};
use crate::config::Config;
use crate::driver::Launcher;
use crate::eval::EvalConfig;
use crate::ies::{parse_ies, validate_against_metadata, Severity, TaskMetadata};
use crate::layout::synth::synth_app;
use crate::layout::{serve_grid, write_corpus, GridScorer, PageInstance, Scorer, SidecarScorer};
use crate::raster::RasterImage;
use crate::sim::load_model_file;
use crate::suite::{load_suite, run_suite, write_reports, Backend, RunSettings};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "guiprobe", version, about = "Evaluate and repair GUI programs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ScorerKind {
    Grid,
    Sidecar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendArg {
    Sim,
    Atspi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AblationArg {
    None,
    NoOperator,
    NoBugScreenshot,
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check an interaction script against its task metadata.
    Validate { ies: PathBuf, meta: PathBuf },
    /// Evaluate every task of a suite directory.
    Run {
        suite_dir: PathBuf,
        #[arg(long, value_enum, default_value = "sim")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "grid")]
        scorer: ScorerKind,
        /// Sidecar command line, split on whitespace.
        #[arg(long)]
        sidecar_cmd: Option<String>,
        #[arg(long, default_value = "report")]
        out: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        layout_gate: Option<f64>,
        #[arg(long)]
        fs_timeout: Option<f64>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Build a labeled layout-similarity corpus from page models.
    Corpus {
        /// Directory of `*.json` app models; each contributes its initial page.
        pages_dir: Option<PathBuf>,
        /// Use this many generated pages instead of a directory.
        #[arg(long, conflicts_with = "pages_dir")]
        synth: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "corpus")]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Run the planner / operator / fixer loop on a workspace.
    Debug {
        workspace: PathBuf,
        /// Task instruction, or `@path` to read it from a file.
        instruction: String,
        /// Directory of reference screenshots (`*.png`).
        screens_dir: PathBuf,
        #[arg(long)]
        reasoner: PathBuf,
        #[arg(long, value_enum, default_value = "none")]
        ablation: AblationArg,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        planner_max: Option<usize>,
        #[arg(long)]
        operator_max: Option<usize>,
        #[arg(long)]
        history_window: Option<usize>,
        #[command(flatten)]
        config: ConfigArgs,
    },
    /// Serve the grid scorer over the sidecar protocol on stdin/stdout.
    Sidecar,
}

struct Failure(i32, String);

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure(EXIT_USAGE, msg.to_string())
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Validate { ies, meta } => cmd_validate(&ies, &meta),
        Command::Run {
            suite_dir,
            backend,
            scorer,
            sidecar_cmd,
            out,
            workers,
            layout_gate,
            fs_timeout,
            config,
        } => {
            let mut cfg = Config::load_or_default(config.config.as_deref()).map_err(usage)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if layout_gate.is_some() {
                cfg.layout_gate = layout_gate;
            }
            if let Some(t) = fs_timeout {
                cfg.fs_timeout_s = t;
            }
            if let Some(cmd) = sidecar_cmd {
                cfg.sidecar = Some(cmd.split_whitespace().map(String::from).collect());
            }
            cfg.validate().map_err(usage)?;
            let backend = match backend {
                BackendArg::Sim => Backend::Sim,
                BackendArg::Atspi => Backend::Atspi,
            };
            cmd_run(&suite_dir, backend, scorer, &out, &cfg)
        }
        Command::Corpus {
            pages_dir,
            synth,
            seed,
            out,
            config,
        } => {
            let cfg = Config::load_or_default(config.config.as_deref()).map_err(usage)?;
            cmd_corpus(pages_dir.as_deref(), synth, seed, &out, &cfg)
        }
        Command::Debug {
            workspace,
            instruction,
            screens_dir,
            reasoner,
            ablation,
            trace,
            planner_max,
            operator_max,
            history_window,
            config,
        } => {
            let mut cfg = Config::load_or_default(config.config.as_deref()).map_err(usage)?;
            cfg.planner_max = planner_max.unwrap_or(cfg.planner_max);
            cfg.operator_max = operator_max.unwrap_or(cfg.operator_max);
            cfg.history_window = history_window.unwrap_or(cfg.history_window);
            cfg.validate().map_err(usage)?;
            let ablation = match ablation {
                AblationArg::None => Ablation::None,
                AblationArg::NoOperator => Ablation::NoOperator,
                AblationArg::NoBugScreenshot => Ablation::NoBugScreenshot,
            };
            cmd_debug(
                &workspace,
                &instruction,
                &screens_dir,
                &reasoner,
                ablation,
                trace.as_deref(),
                &cfg,
            )
        }
        Command::Sidecar => {
            let stdin = std::io::stdin();
            serve_grid(stdin.lock(), std::io::stdout().lock()).map_err(|e| Failure(EXIT_FAILED, e.to_string()))?;
            Ok(EXIT_OK)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn cmd_validate(ies: &Path, meta: &Path) -> Result<i32, Failure> {
    let script = parse_ies(&read(ies)?).map_err(|e| usage(format!("{}: {e}", ies.display())))?;
    let meta = TaskMetadata::parse(&read(meta)?).map_err(|e| usage(format!("{}: {e}", meta.display())))?;
    let report = validate_against_metadata(&script, &meta);
    for f in &report.findings {
        let sev = match f.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        println!("{sev}: step {}: {:?}: {}", f.step, f.kind, f.message);
    }
    if report.has_errors() {
        Ok(EXIT_FAILED)
    } else {
        println!("ok: {} steps, {} findings", script.steps().len(), report.findings.len());
        Ok(EXIT_OK)
    }
}

fn cmd_run(suite_dir: &Path, backend: Backend, scorer: ScorerKind, out: &Path, cfg: &Config) -> Result<i32, Failure> {
    let tasks = load_suite(suite_dir, backend).map_err(usage)?;
    let sidecar;
    let scorer: &dyn Scorer = match scorer {
        ScorerKind::Grid => &GridScorer,
        ScorerKind::Sidecar => {
            let cmd = cfg
                .sidecar
                .as_ref()
                .ok_or_else(|| usage("--scorer sidecar needs --sidecar-cmd or `sidecar` in the config"))?;
            sidecar = SidecarScorer::spawn(cmd).map_err(usage)?;
            &sidecar
        }
    };
    let settings = RunSettings {
        launcher: Launcher::new(),
        scorer,
        eval: EvalConfig {
            layout_gate: cfg.layout_gate,
        },
        timeout: cfg.fs_timeout(),
        prices: cfg.price_table.clone(),
    };
    let reports = run_suite(&tasks, &settings, cfg.workers);
    let suite = write_reports(out, &reports).map_err(usage)?;
    println!(
        "{} tasks: resolved {:.2}%, fs {:.2}%, AE {:.2}, AC {:.2}, CK {:.2}, visual {:.4}, cost {:.4}",
        suite.n_tasks, suite.resolved_pct, suite.fs_pct, suite.ae, suite.ac, suite.ck, suite.avg_visual, suite.avg_cost
    );
    println!("reports written to {}", out.display());
    Ok(EXIT_OK)
}

fn load_pages(dir: &Path) -> Result<Vec<PageInstance>, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let model = load_model_file(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            let id = p.file_stem().unwrap_or_default().to_string_lossy().into_owned();
            Ok(PageInstance::from_model(id, &model))
        })
        .collect()
}

fn cmd_corpus(pages_dir: Option<&Path>, synth: Option<usize>, seed: u64, out: &Path, cfg: &Config) -> Result<i32, Failure> {
    let pages = match (pages_dir, synth) {
        (Some(dir), _) => load_pages(dir)?,
        (None, Some(n)) => (0..n)
            .map(|i| PageInstance::from_model(format!("page{i:04}"), &synth_app(seed.wrapping_add(i as u64))))
            .collect(),
        (None, None) => return Err(usage("give a pages directory or --synth <n>")),
    };
    if pages.len() < 2 {
        return Err(usage(format!("corpus needs at least 2 pages, got {}", pages.len())));
    }
    let records = write_corpus(&pages, seed, &cfg.penalty_weights, out).map_err(usage)?;
    println!("{} pairs from {} pages written to {}", records.len(), pages.len(), out.join("manifest.jsonl").display());
    Ok(EXIT_OK)
}

fn load_screens(dir: &Path) -> Result<Vec<(String, RasterImage)>, Failure> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| usage(format!("{}: {e}", dir.display())))?
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "png"))
        .collect();
    files.sort();
    files
        .iter()
        .map(|p| {
            let img = RasterImage::load_png(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            Ok((p.file_stem().unwrap_or_default().to_string_lossy().into_owned(), img))
        })
        .collect()
}

fn cmd_debug(
    workspace: &Path,
    instruction: &str,
    screens_dir: &Path,
    reasoner: &Path,
    ablation: Ablation,
    trace: Option<&Path>,
    cfg: &Config,
) -> Result<i32, Failure> {
    if !workspace.is_dir() {
        return Err(usage(format!("{}: workspace not found", workspace.display())));
    }
    let instruction = match instruction.strip_prefix('@') {
        Some(path) => read(Path::new(path))?,
        None => instruction.to_string(),
    };
    let screens = load_screens(screens_dir)?;
    let base = reasoner.parent().unwrap_or(Path::new("."));
    let reasoners = load_reasoner_config(reasoner)
        .and_then(|c| c.build(base))
        .map_err(usage)?;
    let config = DebugConfig {
        planner_max: cfg.planner_max,
        operator_max: cfg.operator_max,
        history_window: cfg.history_window,
        launch_timeout: Duration::from_secs_f64(cfg.fs_timeout_s),
        ablation,
    };
    let outcome = run_debug_loop(workspace, &instruction, screens, &Launcher::new(), reasoners, &config);
    if let Some(path) = trace {
        outcome
            .trace
            .write(path)
            .map_err(|e| Failure(EXIT_FAILED, format!("{}: {e}", path.display())))?;
    }
    println!(
        "terminated after {} iterations: {}",
        outcome.iterations, outcome.reason
    );
    Ok(if outcome.terminated_normally { EXIT_OK } else { EXIT_FAILED })
}
