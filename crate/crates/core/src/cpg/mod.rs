//! Code property graph: the AST as a sub-graph plus reference, control-flow
//! and analysis edges.

mod build;
pub mod dot;
mod graph;

use thiserror::Error;

use crate::frontend::ast::Span;

pub use build::{
    add_control_flow, add_function_control_flow, build_cpg, build_full, cfg_reachable, cfg_reachable_set, cfg_successors,
    node_type, resolve_references, TYPE_PROP,
};
pub use graph::*;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum CpgError {
    #[error("{}:{}: unresolved name: {message}", .span.line, .span.col)]
    Name { span: Span, message: String },
    #[error("domain error: {0}")]
    Domain(String),
}
