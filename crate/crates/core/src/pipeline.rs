//! End-to-end driver: parse, build the graph, enrich, detect, harden, emit.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::Serialize;
use thiserror::Error;

use crate::cpg::{build_full, dot::to_dot, Cpg, CpgError, Label};
use crate::detect::{find_integer_sites, find_reentrancy, integer, reentrancy, IntegerBug, ReentrancyBug};
use crate::emit::{emit_source, EmitConfig};
use crate::enrich::enrich;
use crate::frontend::{parse, ParseError, SourceUnit};
use crate::harden::{harden_integer, harden_reentrancy, HardenError, LockDescriptor, Patch};
use crate::report::{FileReport, IntegerRecord, PatchRecord, ReentrancyRecord, SkippedRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Reentrancy,
    Integer,
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "reentrancy" => Ok(Strategy::Reentrancy),
            "integer" => Ok(Strategy::Integer),
            other => Err(format!("unknown strategy `{other}` (expected reentrancy or integer)")),
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Reentrancy => "reentrancy",
            Strategy::Integer => "integer",
        })
    }
}

/// Parses a comma-separated strategy list such as `reentrancy,integer`.
pub fn parse_strategies(s: &str) -> Result<BTreeSet<Strategy>, String> {
    s.split(',').filter(|p| !p.trim().is_empty()).map(Strategy::from_str).collect()
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub strategies: BTreeSet<Strategy>,
    pub emit: EmitConfig,
    /// Soft wall-clock budget, checked between passes.
    pub timeout: Option<Duration>,
    pub dump_cpg: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            strategies: [Strategy::Reentrancy, Strategy::Integer].into(),
            emit: EmitConfig::default(),
            timeout: None,
            dump_cpg: false,
        }
    }
}

impl PipelineConfig {
    pub fn with_strategies(strategies: &[Strategy]) -> Self {
        PipelineConfig { strategies: strategies.iter().copied().collect(), ..Default::default() }
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Graph(#[from] CpgError),
    #[error(transparent)]
    Harden(#[from] HardenError),
    #[error("hardened output does not parse: {0}")]
    Reparse(ParseError),
    #[error("time budget exceeded after {stage}")]
    Timeout { stage: &'static str },
}

impl PipelineError {
    /// Diagnostics with line information, one per line.
    pub fn diagnostics(&self, source_name: &str) -> Vec<String> {
        match self {
            PipelineError::Parse(e) | PipelineError::Reparse(e) => {
                e.diagnostics.iter().map(|d| format!("{source_name}:{d}")).collect()
            }
            other => vec![format!("{source_name}: {other}")],
        }
    }
}

struct Budget {
    start: Instant,
    limit: Option<Duration>,
}

impl Budget {
    fn check(&self, stage: &'static str) -> Result<(), PipelineError> {
        match self.limit {
            Some(l) if self.start.elapsed() > l => Err(PipelineError::Timeout { stage }),
            _ => Ok(()),
        }
    }
}

/// Everything one pipeline run produced.
#[derive(Debug)]
pub struct PipelineOutput {
    pub original: SourceUnit,
    pub cpg: Cpg,
    pub reentrancy: Vec<ReentrancyBug>,
    pub integer: Vec<IntegerBug>,
    pub locks: Vec<LockDescriptor>,
    pub patches: Vec<Patch>,
    /// Integer bugs left without a check, with the reason.
    pub skipped: Vec<(usize, String)>,
    /// Emitted source; `None` in analyze-only runs.
    pub hardened_source: Option<String>,
    pub hardened: Option<SourceUnit>,
    pub dot: Option<String>,
    pub report: FileReport,
}

fn in_patch(cpg: &Cpg, id: usize) -> bool {
    cpg.ancestors(id).chain([id]).any(|n| cpg.has_label(n, Label::Patch))
}

fn build_report(
    name: &str,
    out_cpg: &Cpg,
    r: &[ReentrancyBug],
    i: &[IntegerBug],
    p: &[Patch],
    skipped: &[(usize, String)],
) -> FileReport {
    FileReport {
        source_name: name.to_string(),
        reentrancy: r
            .iter()
            .map(|b| ReentrancyRecord {
                kind: b.kind.to_string(),
                function: out_cpg.node(b.enclosing_function).name().unwrap_or("?").to_string(),
                call_line: out_cpg.node(b.external_call).line(),
                write_line: out_cpg.node(b.state_update).line(),
                variable: b.variable.and_then(|v| out_cpg.node(v).name()).map(str::to_string),
                text: reentrancy::report_line(out_cpg, b),
            })
            .collect(),
        integer: i
            .iter()
            .map(|b| {
                let span = out_cpg.node(b.expr).span.unwrap_or_default();
                IntegerRecord {
                    kind: b.kind.to_string(),
                    line: span.line,
                    col: span.col,
                    operand_type: b.operand_type.to_string(),
                    anchor_line: out_cpg.node(b.mitigation.anchor).line(),
                    in_patch: in_patch(out_cpg, b.expr),
                    text: integer::report_line(out_cpg, b),
                }
            })
            .collect(),
        patches: p
            .iter()
            .map(|p| PatchRecord { kind: p.kind.to_string(), anchor_line: p.anchor_line, bug: p.bug, text: p.report_line() })
            .collect(),
        skipped: skipped
            .iter()
            .map(|(bug, reason)| SkippedRecord { line: bug_line(out_cpg, *bug), reason: reason.clone() })
            .collect(),
        diagnostics: vec![],
        diff: None,
    }
}

/// Source line of the expression a bug node points at.
fn bug_line(cpg: &Cpg, bug: usize) -> u32 {
    cpg.out_edges(bug, crate::cpg::EdgeKind::BugRole).map(|e| cpg.node(e.dst).line()).find(|l| *l > 0).unwrap_or(0)
}

/// Runs detection, and hardening unless `analyze_only`.
pub fn run_pipeline(source: &str, name: &str, cfg: &PipelineConfig, analyze_only: bool) -> Result<PipelineOutput, PipelineError> {
    let budget = Budget { start: Instant::now(), limit: cfg.timeout };
    let original = parse(source, name)?;
    budget.check("parsing")?;
    let mut cpg = build_full(&original)?;
    budget.check("graph construction")?;
    enrich(&mut cpg);
    budget.check("enrichment")?;
    let mut reentrancy_bugs = Vec::new();
    let mut integer_bugs = Vec::new();
    let mut locks = Vec::new();
    let mut patches = Vec::new();
    let mut skipped = Vec::new();
    if cfg.strategies.contains(&Strategy::Reentrancy) {
        reentrancy_bugs = find_reentrancy(&mut cpg);
        budget.check("reentrancy detection")?;
        if !analyze_only {
            let (l, p) = harden_reentrancy(&mut cpg, &reentrancy_bugs)?;
            locks = l;
            patches.extend(p);
            budget.check("reentrancy hardening")?;
        }
    }
    if cfg.strategies.contains(&Strategy::Integer) {
        integer_bugs = find_integer_sites(&mut cpg);
        budget.check("integer detection")?;
        if !analyze_only {
            let out = harden_integer(&mut cpg, &integer_bugs)?;
            patches.extend(out.patches);
            skipped = out.unhardened;
            budget.check("integer hardening")?;
        }
    }
    let (hardened_source, hardened) = if analyze_only {
        (None, None)
    } else {
        let text = emit_source(&cpg, &cfg.emit);
        let unit = parse(&text, name).map_err(PipelineError::Reparse)?;
        budget.check("emission")?;
        (Some(text), Some(unit))
    };
    let dot = cfg.dump_cpg.then(|| to_dot(&cpg));
    let report = build_report(name, &cpg, &reentrancy_bugs, &integer_bugs, &patches, &skipped);
    Ok(PipelineOutput {
        original,
        cpg,
        reentrancy: reentrancy_bugs,
        integer: integer_bugs,
        locks,
        patches,
        skipped,
        hardened_source,
        hardened,
        dot,
        report,
    })
}

/// Hardens `source` with the given strategies and returns the emitted text.
pub fn harden_source(source: &str, name: &str, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    run_pipeline(source, name, cfg, false)
}

pub fn analyze_source(source: &str, name: &str, cfg: &PipelineConfig) -> Result<PipelineOutput, PipelineError> {
    run_pipeline(source, name, cfg, true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strategy_lists_parse() {
        assert_eq!(parse_strategies("reentrancy,integer").unwrap().len(), 2);
        assert_eq!(parse_strategies("integer").unwrap(), [Strategy::Integer].into());
        assert!(parse_strategies("gas").is_err());
    }

    #[test]
    fn analyze_only_emits_nothing() {
        let out =
            analyze_source("contract C { uint x; function f(uint a) public { x = x + a; } }", "c", &PipelineConfig::default())
                .unwrap();
        assert!(out.hardened_source.is_none());
        assert_eq!(out.report.integer.len(), 1);
        assert!(out.patches.is_empty());
    }

    #[test]
    fn zero_budget_times_out() {
        let cfg = PipelineConfig { timeout: Some(Duration::ZERO), ..Default::default() };
        let err = harden_source("contract C { }", "c", &cfg).unwrap_err();
        assert!(matches!(err, PipelineError::Timeout { .. }));
    }

    #[test]
    fn parse_errors_carry_lines() {
        let err = harden_source("contract C {\n  function f( public {}\n}", "bad.msol", &PipelineConfig::default()).unwrap_err();
        let d = err.diagnostics("bad.msol");
        assert!(d[0].starts_with("bad.msol:2:"), "{d:?}");
    }
}
