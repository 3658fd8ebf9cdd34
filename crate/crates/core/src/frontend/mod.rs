//! MiniSol front end: lexing, parsing, checking, and the structured AST document form.

pub mod ast;
pub mod generic;
pub mod json;
pub mod lexer;
pub mod parser;
pub mod sema;
pub mod types;

use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use ast::*;
pub use generic::{AstNode, SchemaError};
pub use json::{ast_to_json, json_to_ast};
pub use parser::{parse_expr, parse_stmt, parse_syntax};

/// Parsing stops collecting diagnostics after this many.
pub const MAX_DIAGNOSTICS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DiagnosticKind {
    SyntaxError,
    NameError,
    TypeError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { kind: DiagnosticKind::SyntaxError, span, message: message.into() }
    }

    pub fn name_error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { kind: DiagnosticKind::NameError, span, message: message.into() }
    }

    pub fn type_error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { kind: DiagnosticKind::TypeError, span, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {:?}: {}", self.span.line, self.span.col, self.kind, self.message)
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("{} diagnostic(s) in {source_name}; first: {}", .diagnostics.len(), .diagnostics[0])]
pub struct ParseError {
    pub source_name: String,
    pub diagnostics: Vec<Diagnostic>,
}

/// Parse and check a MiniSol source file.
pub fn parse(source: &str, source_name: &str) -> Result<SourceUnit, ParseError> {
    let unit = parse_syntax(source, source_name)?;
    let diagnostics = sema::check(&unit);
    if diagnostics.is_empty() {
        Ok(unit)
    } else {
        Err(ParseError { source_name: source_name.to_string(), diagnostics })
    }
}
