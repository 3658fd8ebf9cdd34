//! Command-line driver.
//!
//! Exit status: 0 on success, 1 when any input produced diagnostics,
//! 2 when a differential run classified a transaction as BROKEN.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use solharden::emit::EmitConfig;
use solharden::pipeline::{parse_strategies, run_pipeline, PipelineConfig};
use solharden::report::{render_json, render_text, DiffSection, FileReport};
use solharden::vm::{run_scenario, Scenario};

#[derive(Parser)]
#[command(name = "solharden", version, about = "Harden MiniSol contracts against reentrancy and integer bugs")]
struct Cli {
    #[command(subcommand)]
    mode: Mode,
}

#[derive(Subcommand)]
enum Mode {
    /// Insert guards and checks, writing hardened source.
    Harden(Common),
    /// Report bugs without writing any output file.
    AnalyzeOnly(Common),
    /// Harden in memory and replay a scenario on both versions.
    Diff(Common),
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum ReportFormat {
    Text,
    Json,
}

#[derive(Args)]
struct Common {
    /// Input files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Comma-separated subset of `reentrancy,integer`.
    #[arg(long, default_value = "reentrancy,integer")]
    strategy: String,
    /// Output file, or directory when several inputs are given.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Write the final graph as Graphviz text next to the output.
    #[arg(long)]
    dump_cpg: bool,
    /// Scenario file for diff mode.
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// Tag synthesized lines with a marker comment.
    #[arg(long)]
    mark_patches: bool,
    /// Soft per-file time budget.
    #[arg(long)]
    timeout_secs: Option<u64>,
    #[arg(long, value_enum, default_value = "text")]
    report: ReportFormat,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Kind {
    Harden,
    Analyze,
    Diff,
}

struct Outcome {
    report: FileReport,
    broken: bool,
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Where the hardened version of `input` goes.
fn output_path(input: &Path, output: Option<&Path>, many: bool) -> PathBuf {
    match output {
        Some(o) if many => o.join(file_name(input)),
        Some(o) => o.to_path_buf(),
        None => {
            let stem = input.file_stem().map_or_else(|| "out".into(), |s| s.to_string_lossy().into_owned());
            input.with_file_name(format!("{stem}.hardened.msol"))
        }
    }
}

fn process(kind: Kind, input: &Path, c: &Common, cfg: &PipelineConfig, scenario: Option<&Scenario>, many: bool) -> Outcome {
    let name = file_name(input);
    let fail = |diags: Vec<String>| Outcome { report: FileReport::failed(&name, diags), broken: false };
    let source = match fs::read_to_string(input) {
        Ok(s) => s,
        Err(e) => return fail(vec![format!("{}: {e}", input.display())]),
    };
    let out = match run_pipeline(&source, &name, cfg, kind == Kind::Analyze) {
        Ok(o) => o,
        Err(e) => return fail(e.diagnostics(&name)),
    };
    let mut report = out.report;
    let mut broken = false;
    let target = output_path(input, c.output.as_deref(), many);
    match kind {
        Kind::Harden => {
            let text = out.hardened_source.as_deref().expect("harden mode emits source");
            if let Err(e) = fs::write(&target, text) {
                report.diagnostics.push(format!("{}: {e}", target.display()));
            }
        }
        Kind::Diff => {
            let scenario = scenario.expect("diff mode has a scenario");
            let hardened = out.hardened.as_ref().expect("diff mode hardens");
            match run_scenario(&out.original, hardened, scenario) {
                Ok(d) => {
                    broken = d.has_broken();
                    report.diff = Some(DiffSection::from(&d));
                }
                Err(e) => report.diagnostics.push(format!("{name}: {e}")),
            }
        }
        Kind::Analyze => {}
    }
    if let Some(dot) = &out.dot {
        let base = if kind == Kind::Harden { target.clone() } else { input.to_path_buf() };
        let path = base.with_extension("cpg.dot");
        if let Err(e) = fs::write(&path, dot) {
            report.diagnostics.push(format!("{}: {e}", path.display()));
        }
    }
    Outcome { report, broken }
}

fn run(kind: Kind, c: Common) -> Result<ExitCode, String> {
    let strategies = parse_strategies(&c.strategy)?;
    if kind == Kind::Harden && strategies.is_empty() {
        return Err("harden mode needs at least one strategy".into());
    }
    let scenario = match (kind, &c.scenario) {
        (Kind::Diff, None) => return Err("diff mode requires --scenario".into()),
        (Kind::Diff, Some(p)) => Some(Scenario::load(p).map_err(|e| format!("{}: {e}", p.display()))?),
        _ => None,
    };
    let many = c.inputs.len() > 1;
    if many && kind == Kind::Harden {
        if let Some(dir) = &c.output {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        }
    }
    let cfg = PipelineConfig {
        strategies,
        emit: EmitConfig { mark_patches: c.mark_patches, ..EmitConfig::default() },
        timeout: c.timeout_secs.map(Duration::from_secs),
        dump_cpg: c.dump_cpg,
    };
    let outcomes: Vec<Outcome> = c.inputs.par_iter().map(|i| process(kind, i, &c, &cfg, scenario.as_ref(), many)).collect();
    let reports: Vec<FileReport> = outcomes.iter().map(|o| o.report.clone()).collect();
    match c.report {
        ReportFormat::Text => print!("{}", render_text(&reports)),
        ReportFormat::Json => println!("{}", render_json(&reports)),
    }
    Ok(if outcomes.iter().any(|o| !o.report.diagnostics.is_empty()) {
        ExitCode::from(1)
    } else if outcomes.iter().any(|o| o.broken) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, common) = match cli.mode {
        Mode::Harden(c) => (Kind::Harden, c),
        Mode::AnalyzeOnly(c) => (Kind::Analyze, c),
        Mode::Diff(c) => (Kind::Diff, c),
    };
    match run(kind, common) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
