//! Lock synthesis for reentrancy bugs.
//!
//! Each vulnerable state variable gets a lock. The lock is set right before
//! the statement holding the external call and released right after it, and
//! every public function writing the variable starts with a guard.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use crate::cpg::{Cpg, Label, NodeId};
use crate::detect::{ReentrancyBug, ReentrancyKind};
use crate::emit::expr_to_string;
use crate::enrich::{mutated_lvalues, written_state_var};
use crate::frontend::ast::*;

use super::{child_index, insert_state_var, insert_stmt, refresh, HardenError, Patch, PatchKind, RESERVED_PREFIX};

/// Name of the lock shared by all delegate-as-update bugs.
pub const MAIN_LOCK: &str = "_hcc_main_lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub enum LockKind {
    /// One flag for the whole variable.
    Bool,
    /// One flag per key; the key expression is the same at every use.
    Keyed { key_type: String, key: String },
    /// Conservative flag for a mapping whose written key is not available at guard sites.
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LockDescriptor {
    pub for_variable: Option<NodeId>,
    pub lock_name: String,
    pub kind: LockKind,
    pub is_main_lock: bool,
    /// The inserted declaration.
    pub decl: NodeId,
    #[serde(skip)]
    key_expr: Option<Expr>,
}

impl LockDescriptor {
    /// Expression naming the lock flag: `l` or `l[key]`.
    pub fn flag(&self) -> Expr {
        let base = Expr::ident(&self.lock_name);
        match &self.key_expr {
            Some(k) => Expr::index(base, k.clone()),
            None => base,
        }
    }

    fn guard(&self) -> Stmt {
        let shown = self.lock_name.strip_prefix(RESERVED_PREFIX).unwrap_or(&self.lock_name);
        let (cond, msg) = match &self.kind {
            LockKind::Keyed { key, .. } => {
                (Expr::binary(BinOp::Eq, self.flag(), Expr::bool(false)), format!("[ HCC ] {shown}[{key}] is locked!"))
            }
            LockKind::Bool => (Expr::binary(BinOp::Eq, self.flag(), Expr::bool(false)), format!("[ HCC ] {shown} is locked!")),
            LockKind::Any => (Expr::unary(UnOp::Not, self.flag()), format!("[ HCC ] {shown} is locked!")),
        };
        Stmt::new(StmtKind::Require { cond, msg: Some(msg) })
    }

    fn assign(&self, value: bool) -> Stmt {
        Stmt::new(StmtKind::Assign { lhs: self.flag(), op: AssignOp::Assign, rhs: Expr::bool(value) })
    }
}

/// First mapping key of the write to `sv` performed directly by statement `w`.
fn written_key(cpg: &Cpg, w: NodeId, sv: NodeId) -> Option<NodeId> {
    let lv = mutated_lvalues(cpg, w).into_iter().find(|lv| written_state_var(cpg, *lv) == Some(sv))?;
    let mut node = lv;
    loop {
        if cpg.node(node).kind != "Index" {
            return None;
        }
        let base = cpg.children(node)[0];
        if cpg.node(base).kind == "Ident" {
            return Some(cpg.children(node)[1]);
        }
        node = base;
    }
}

/// True for keys that mean the same thing in every function (`msg.sender`, constants).
fn function_independent(e: &Expr) -> bool {
    let mut ok = true;
    e.walk(&mut |x| ok &= matches!(x.kind, ExprKind::MsgSender | ExprKind::Literal(_)));
    ok
}

fn fresh_name(taken: &BTreeSet<String>, base: &str) -> String {
    if !taken.contains(base) {
        return base.to_string();
    }
    (1..).map(|i| format!("{base}_{i}")).find(|n| !taken.contains(n)).expect("unbounded suffixes")
}

fn contract_names(cpg: &Cpg, contract: NodeId) -> BTreeSet<String> {
    cpg.children(contract).iter().filter_map(|c| cpg.node(*c).name().map(str::to_string)).collect()
}

/// Outermost statement around `s` that sits directly in a block.
fn wrap_target(cpg: &Cpg, mut s: NodeId) -> NodeId {
    while let Some(p) = cpg.parent(s) {
        if cpg.node(p).kind == "Block" {
            break;
        }
        s = p;
    }
    s
}

fn body(cpg: &Cpg, f: NodeId) -> Option<NodeId> {
    cpg.children(f).iter().copied().find(|c| cpg.node(*c).kind == "Block")
}

fn guardable(cpg: &Cpg, f: NodeId) -> bool {
    let n = cpg.node(f);
    n.prop_str("visibility") != Some("internal")
        && n.prop_str("visibility") != Some("private")
        && !n.prop_bool("constructor")
        && body(cpg, f).is_some()
}

/// True when an earlier hardening run already sets a lock right before the statement
/// around `stmt` and releases the same lock right after it.
fn already_locked(cpg: &Cpg, stmt: NodeId) -> bool {
    let t = wrap_target(cpg, stmt);
    let Some(block) = cpg.parent(t) else { return false };
    let kids = cpg.children(block);
    let at = child_index(cpg, block, t);
    let is_patch = |k: &&NodeId| cpg.has_label(**k, Label::Patch);
    let lock_write = |k: &NodeId, value: bool| match cpg.stmt(*k).kind {
        StmtKind::Assign { lhs, op: AssignOp::Assign, rhs }
            if rhs.kind == ExprKind::Literal(Literal::Bool(value))
                && lhs.lvalue_root().is_some_and(|r| r.starts_with(RESERVED_PREFIX)) =>
        {
            Some(expr_to_string(&lhs))
        }
        _ => None,
    };
    let set: BTreeSet<String> = kids[..at].iter().rev().take_while(is_patch).filter_map(|k| lock_write(k, true)).collect();
    kids[at + 1..].iter().take_while(is_patch).filter_map(|k| lock_write(k, false)).any(|l| set.contains(&l))
}

struct Hardener<'a> {
    cpg: &'a mut Cpg,
    patches: Vec<Patch>,
    wrapped: BTreeSet<(NodeId, String)>,
    guarded: BTreeSet<(NodeId, String)>,
    guard_count: BTreeMap<NodeId, usize>,
}

impl Hardener<'_> {
    fn push(&mut self, kind: PatchKind, node: NodeId, bug: NodeId, anchor: NodeId) {
        let anchor_line = self.cpg.node(anchor).line();
        self.patches.push(Patch { kind, inserted_nodes: vec![node], bug, anchor_line });
    }

    fn wrap(&mut self, lock: &LockDescriptor, stmt: NodeId, bug: NodeId) -> Result<(), HardenError> {
        let t = wrap_target(self.cpg, stmt);
        if !self.wrapped.insert((t, lock.lock_name.clone())) {
            return Ok(());
        }
        if self.cpg.node(t).kind == "Return" {
            return Err(HardenError::UnanchorableReturn { line: self.cpg.node(t).line() });
        }
        let block = self.cpg.parent(t).expect("wrap targets sit in blocks");
        let at = child_index(self.cpg, block, t);
        let set = insert_stmt(self.cpg, block, at, lock.assign(true), bug);
        self.push(PatchKind::LockSet, set, bug, t);
        let unset = insert_stmt(self.cpg, block, at + 2, lock.assign(false), bug);
        self.push(PatchKind::LockUnset, unset, bug, t);
        Ok(())
    }

    fn guard(&mut self, lock: &LockDescriptor, f: NodeId, bug: NodeId) {
        if !guardable(self.cpg, f) || !self.guarded.insert((f, lock.lock_name.clone())) {
            return;
        }
        let block = body(self.cpg, f).expect("guardable functions have bodies");
        let at = self.guard_count.entry(f).or_default();
        let id = insert_stmt(self.cpg, block, *at, lock.guard(), bug);
        *at += 1;
        self.push(PatchKind::Guard, id, bug, f);
    }

    fn declare(&mut self, contract: NodeId, after: Option<NodeId>, name: &str, ty: TypeExpr, bug: NodeId) -> NodeId {
        let index = match after {
            Some(sv) => child_index(self.cpg, contract, sv) + 1,
            None => self.cpg.children(contract).iter().take_while(|c| self.cpg.node(**c).kind == "VarDecl").count(),
        };
        let var = VarDecl { name: name.to_string(), ty, storage: StorageClass::State, init: None, span: Span::NONE, patch: true };
        let id = insert_state_var(self.cpg, contract, index, var, bug);
        self.push(PatchKind::LockDecl, id, bug, after.unwrap_or(contract));
        id
    }
}

/// Decides the lock shape for `sv` from every bug writing it.
fn lock_shape(cpg: &Cpg, sv: NodeId, bugs: &[&ReentrancyBug]) -> (LockKind, Option<Expr>, TypeExpr) {
    let sv_ty = crate::frontend::parser::parse_type_str(cpg.node(sv).prop_str("type").unwrap_or_default());
    let Some(TypeExpr::Mapping(key_ty, _)) = sv_ty else { return (LockKind::Bool, None, TypeExpr::Bool) };
    let keys: Vec<Option<Expr>> =
        bugs.iter().map(|b| written_key(cpg, b.state_update, sv).map(|k| cpg.expr(k)).filter(function_independent)).collect();
    let texts: BTreeSet<Option<String>> = keys.iter().map(|k| k.as_ref().map(expr_to_string)).collect();
    match (texts.len(), keys.first()) {
        (1, Some(Some(k))) => {
            let mut key = k.clone();
            crate::frontend::ast::strip::expr(&mut key);
            let kind = LockKind::Keyed { key_type: key_ty.to_string(), key: expr_to_string(&key) };
            (kind, Some(key), TypeExpr::Mapping(key_ty, Box::new(TypeExpr::Bool)))
        }
        _ => (LockKind::Any, None, TypeExpr::Bool),
    }
}

/// Inserts locks, lock set/unset pairs and guards for `bugs`.
pub fn harden_reentrancy(cpg: &mut Cpg, bugs: &[ReentrancyBug]) -> Result<(Vec<LockDescriptor>, Vec<Patch>), HardenError> {
    let bugs: Vec<&ReentrancyBug> = bugs.iter().filter(|b| !already_locked(cpg, b.external_call)).collect();
    let mut locks: Vec<LockDescriptor> = Vec::new();
    let mut h =
        Hardener { cpg, patches: Vec::new(), wrapped: BTreeSet::new(), guarded: BTreeSet::new(), guard_count: BTreeMap::new() };
    // per-variable locks, in order of first appearance
    let mut by_var: Vec<(NodeId, Vec<&ReentrancyBug>)> = Vec::new();
    for &b in bugs.iter().filter(|b| b.kind != ReentrancyKind::DelegateAsUpdate) {
        let sv = b.variable.expect("variable present for non-delegate-update bugs");
        match by_var.iter_mut().find(|(v, _)| *v == sv) {
            Some((_, list)) => list.push(b),
            None => by_var.push((sv, vec![b])),
        }
    }
    for (sv, var_bugs) in &by_var {
        let contract = h.cpg.enclosing_contract(*sv).expect("state variables live in contracts");
        let (kind, key_expr, ty) = lock_shape(h.cpg, *sv, var_bugs);
        let sv_name = h.cpg.node(*sv).name().unwrap_or_default().to_string();
        let base = match kind {
            LockKind::Any => format!("{RESERVED_PREFIX}lock_{sv_name}_any"),
            _ => format!("{RESERVED_PREFIX}lock_{sv_name}"),
        };
        let name = fresh_name(&contract_names(h.cpg, contract), &base);
        let first_bug = var_bugs[0].node;
        let decl = h.declare(contract, Some(*sv), &name, ty, first_bug);
        let lock = LockDescriptor { for_variable: Some(*sv), lock_name: name, kind, is_main_lock: false, decl, key_expr };
        for b in var_bugs {
            h.wrap(&lock, b.external_call, b.node)?;
        }
        for b in var_bugs {
            for f in &b.writer_functions {
                h.guard(&lock, *f, b.node);
            }
        }
        locks.push(lock);
    }
    let delegate: Vec<&ReentrancyBug> = bugs.iter().copied().filter(|b| b.kind == ReentrancyKind::DelegateAsUpdate).collect();
    let mut main_locks: BTreeMap<NodeId, LockDescriptor> = BTreeMap::new();
    for b in &delegate {
        let contract = h.cpg.enclosing_contract(b.enclosing_function).expect("functions live in contracts");
        let lock = match main_locks.get(&contract) {
            Some(l) => l.clone(),
            None => {
                let name = fresh_name(&contract_names(h.cpg, contract), MAIN_LOCK);
                let decl = h.declare(contract, None, &name, TypeExpr::Bool, b.node);
                let lock = LockDescriptor {
                    for_variable: None,
                    lock_name: name,
                    kind: LockKind::Bool,
                    is_main_lock: true,
                    decl,
                    key_expr: None,
                };
                main_locks.insert(contract, lock.clone());
                lock
            }
        };
        h.wrap(&lock, b.external_call, b.node)?;
        h.wrap(&lock, b.state_update, b.node)?;
        let functions: Vec<NodeId> =
            h.cpg.children(contract).iter().copied().filter(|f| h.cpg.has_label(*f, Label::Function)).collect();
        for f in functions {
            h.guard(&lock, f, b.node);
        }
    }
    locks.extend(main_locks.into_values());
    let patches = h.patches;
    if !patches.is_empty() {
        refresh(cpg)?;
    }
    Ok((locks, patches))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_full;
    use crate::detect::find_reentrancy;
    use crate::emit::{emit_source, EmitConfig};
    use crate::enrich::enrich;
    use crate::frontend::parse;

    fn harden(src: &str) -> (String, Vec<LockDescriptor>) {
        let mut cpg = build_full(&parse(src, "t").unwrap()).unwrap();
        enrich(&mut cpg);
        let bugs = find_reentrancy(&mut cpg);
        let (locks, _) = harden_reentrancy(&mut cpg, &bugs).unwrap();
        (emit_source(&cpg, &EmitConfig::default()), locks)
    }

    #[test]
    fn scalar_variable_gets_bool_lock() {
        let (out, locks) = harden("contract C { uint x; function f(address a) public { a.transfer(1); x = 1; } }");
        assert_eq!(locks[0].kind, LockKind::Bool);
        assert!(out.contains("bool _hcc_lock_x;"));
        assert!(out.contains("require(_hcc_lock_x == false, \"[ HCC ] lock_x is locked!\");"));
    }

    #[test]
    fn parameter_key_falls_back_to_any_lock() {
        let (out, locks) =
            harden("contract C { mapping(address => uint) b; function f(address a) public { a.transfer(1); b[a] = 0; } }");
        assert_eq!(locks[0].kind, LockKind::Any);
        assert!(out.contains("require(!_hcc_lock_b_any, \"[ HCC ] lock_b_any is locked!\");"), "{out}");
    }

    #[test]
    fn existing_lock_pair_is_reused() {
        let src = "contract C { uint x; function f(address a) public { a.transfer(1); x = 1; } }";
        let (once, _) = harden(src);
        let (twice, locks) = harden(&once);
        assert!(locks.is_empty());
        assert_eq!(once, twice);
    }

    #[test]
    fn clean_contract_is_unchanged() {
        let src = "contract C { uint x; function f(address a) public { x = 1; a.transfer(1); } }";
        let mut cpg = build_full(&parse(src, "t").unwrap()).unwrap();
        enrich(&mut cpg);
        let before = cpg.clone();
        let bugs = find_reentrancy(&mut cpg);
        let (locks, patches) = harden_reentrancy(&mut cpg, &bugs).unwrap();
        assert!(locks.is_empty() && patches.is_empty());
        assert_eq!(cpg, before);
    }

    #[test]
    fn delegate_update_uses_main_lock_everywhere() {
        let (out, locks) = harden(
            "contract C { address lib; uint y; function f(address e) public { e.call.value(0)(\"\"); lib.delegatecall(); }
               function g() public { y = 1; } function h() internal { y = 2; } }",
        );
        assert!(locks[0].is_main_lock);
        assert_eq!(out.matches("require(_hcc_main_lock == false, \"[ HCC ] main_lock is locked!\");").count(), 2);
        assert_eq!(out.matches("_hcc_main_lock = true;").count(), 2);
    }
}
