//! Text and JSON reports. The JSON form mirrors the text fields.

use serde::Serialize;

use crate::vm::{Classification, DiffReport};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReentrancyRecord {
    pub kind: String,
    pub function: String,
    pub call_line: u32,
    pub write_line: u32,
    pub variable: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegerRecord {
    pub kind: String,
    pub line: u32,
    pub col: u32,
    pub operand_type: String,
    pub anchor_line: u32,
    /// True when the operation sits inside a synthesized statement.
    pub in_patch: bool,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PatchRecord {
    pub kind: String,
    pub anchor_line: u32,
    pub bug: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkippedRecord {
    pub line: u32,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxRecord {
    pub index: usize,
    pub tag: String,
    pub function: String,
    pub classification: Classification,
    pub steps_orig: u64,
    pub steps_hard: u64,
    pub overhead: i64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiffSection {
    pub txs: Vec<TxRecord>,
    pub equivalent: usize,
    pub prevented: usize,
    pub broken: usize,
    pub summary: String,
}

impl From<&DiffReport> for DiffSection {
    fn from(r: &DiffReport) -> Self {
        DiffSection {
            txs: r
                .txs
                .iter()
                .map(|t| TxRecord {
                    index: t.index,
                    tag: t.tag.to_string(),
                    function: t.function.clone(),
                    classification: t.classification,
                    steps_orig: t.steps_orig,
                    steps_hard: t.steps_hard,
                    overhead: t.overhead(),
                    text: t.line(),
                })
                .collect(),
            equivalent: r.count(Classification::Equivalent),
            prevented: r.count(Classification::Prevented),
            broken: r.count(Classification::Broken),
            summary: r.summary(),
        }
    }
}

/// Everything reported for one input file.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FileReport {
    pub source_name: String,
    pub reentrancy: Vec<ReentrancyRecord>,
    pub integer: Vec<IntegerRecord>,
    pub patches: Vec<PatchRecord>,
    pub skipped: Vec<SkippedRecord>,
    pub diagnostics: Vec<String>,
    pub diff: Option<DiffSection>,
}

impl FileReport {
    pub fn failed(source_name: &str, diagnostics: Vec<String>) -> Self {
        FileReport { source_name: source_name.to_string(), diagnostics, ..Default::default() }
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![format!("== {}", self.source_name)];
        lines.extend(self.diagnostics.iter().map(|d| format!("error: {d}")));
        lines.extend(self.reentrancy.iter().map(|r| r.text.clone()));
        lines.extend(self.integer.iter().map(|r| r.text.clone()));
        lines.extend(self.patches.iter().map(|r| r.text.clone()));
        lines.extend(self.skipped.iter().map(|s| format!("SKIP line={} {}", s.line, s.reason)));
        if let Some(d) = &self.diff {
            lines.extend(d.txs.iter().map(|t| t.text.clone()));
            lines.push(d.summary.clone());
        }
        let mut out = lines.join("\n");
        out.push('\n');
        out
    }
}

/// Reports for several files, in input order.
pub fn render_text(reports: &[FileReport]) -> String {
    reports.iter().map(FileReport::to_text).collect()
}

pub fn render_json(reports: &[FileReport]) -> String {
    serde_json::to_string_pretty(reports).expect("reports serialize")
}
