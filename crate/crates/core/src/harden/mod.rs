//! Patch synthesis: lock variables and guards against reentrancy, assertions
//! against integer bugs. Patches are inserted as Patch-labeled AST subtrees.

pub mod checks;
mod integer;
mod reentrancy;

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::cpg::{add_control_flow, resolve_references, Cpg, EdgeKind, NodeId};
use crate::frontend::ast::{Stmt, VarDecl};
use crate::frontend::generic::{lower_stmt, lower_var};

pub use checks::{arithmetic_check, cast_check, make_integer_check, CheckForm};
pub use integer::{harden_integer, IntegerOutcome};
pub use reentrancy::{harden_reentrancy, LockDescriptor, LockKind};

/// Reserved prefix of every identifier the hardener introduces.
pub const RESERVED_PREFIX: &str = crate::frontend::parser::RESERVED_PREFIX;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum HardenError {
    #[error("conflicting patches: {0}")]
    PatchConflict(String),
    #[error("line {line}: a lock cannot be released after a return statement")]
    UnanchorableReturn { line: u32 },
    #[error("unsupported operand type: {0}")]
    UnsupportedType(String),
    #[error("line {line}: operand has side effects and cannot be re-evaluated")]
    SideEffectingOperand { line: u32 },
    #[error("patched graph failed to re-resolve: {0}")]
    Graph(#[from] crate::cpg::CpgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum PatchKind {
    LockDecl,
    Guard,
    LockSet,
    LockUnset,
    IntegerAssert,
}

impl fmt::Display for PatchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Patch {
    pub kind: PatchKind,
    /// Root nodes of the inserted subtrees.
    pub inserted_nodes: Vec<NodeId>,
    /// Bug node the patch mitigates.
    pub bug: NodeId,
    /// Source line of the statement or declaration the patch is placed against.
    pub anchor_line: u32,
}

impl Patch {
    /// `PATCH <kind> line=<n> bug=<id>`
    pub fn report_line(&self) -> String {
        format!("PATCH {} line={} bug={}", self.kind, self.anchor_line, self.bug)
    }
}

fn patch_of(cpg: &mut Cpg, inserted: NodeId, bug: NodeId) {
    cpg.add_edge(EdgeKind::PatchOf, inserted, bug, BTreeMap::new());
}

/// Inserts `stmt` (marked as a patch) into `block` at `index`.
pub(crate) fn insert_stmt(cpg: &mut Cpg, block: NodeId, index: usize, mut stmt: Stmt, bug: NodeId) -> NodeId {
    stmt.patch = true;
    let id = cpg.insert_subtree(Some(block), Some(index), &lower_stmt(&stmt));
    patch_of(cpg, id, bug);
    id
}

pub(crate) fn insert_state_var(cpg: &mut Cpg, contract: NodeId, index: usize, mut var: VarDecl, bug: NodeId) -> NodeId {
    var.patch = true;
    let id = cpg.insert_subtree(Some(contract), Some(index), &lower_var(&var));
    patch_of(cpg, id, bug);
    id
}

pub(crate) fn child_index(cpg: &Cpg, parent: NodeId, child: NodeId) -> usize {
    cpg.children(parent).iter().position(|c| *c == child).expect("child is listed under its parent")
}

/// Re-derives references, types and control flow after insertions.
pub(crate) fn refresh(cpg: &mut Cpg) -> Result<(), HardenError> {
    resolve_references(cpg)?;
    add_control_flow(cpg);
    Ok(())
}
