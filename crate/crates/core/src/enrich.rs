//! Enrichment passes: external-call labeling and state-write analysis.
//!
//! Both passes are monotone worklist fixpoints over `CallsTo` edges. They only
//! add labels and edges, so the result does not depend on worklist order.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde_json::Value;

use crate::cpg::{Cpg, EdgeKind, Label, NodeId};

/// Order in which the initial worklist is seeded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WorklistOrder {
    #[default]
    Forward,
    Reverse,
}

fn seeded(mut items: Vec<NodeId>, order: WorklistOrder) -> VecDeque<NodeId> {
    if order == WorklistOrder::Reverse {
        items.reverse();
    }
    items.into()
}

fn is_patch(cpg: &Cpg, id: NodeId) -> bool {
    cpg.has_label(id, Label::Patch)
}

/// Labels external calls and propagates `ContainsExternalCall` backward over the call graph.
pub fn call_analysis(cpg: &mut Cpg) {
    call_analysis_with(cpg, WorklistOrder::Forward);
}

pub fn call_analysis_with(cpg: &mut Cpg, order: WorklistOrder) {
    let exprs: Vec<NodeId> = cpg.nodes_with(Label::Expression).filter(|n| !is_patch(cpg, *n)).collect();
    let mut worklist = Vec::new();
    for e in exprs {
        let external = match cpg.node(e).kind.as_str() {
            "LowLevelCall" | "Transfer" => true,
            "DelegateCall" => {
                cpg.add_label(e, Label::DelegateCall);
                true
            }
            "CallExternal" => cpg.out_edges(e, EdgeKind::CallsTo).next().is_none(),
            _ => false,
        };
        if external {
            cpg.add_label(e, Label::ExternalCall);
            if let Some(f) = mark_site(cpg, e) {
                worklist.push(f);
            }
        }
    }
    let mut queue = seeded(worklist, order);
    while let Some(f) = queue.pop_front() {
        let sites: Vec<NodeId> = cpg.in_edges(f, EdgeKind::CallsTo).map(|e| e.src).collect();
        for site in sites {
            if is_patch(cpg, site) {
                continue;
            }
            cpg.add_label(site, Label::ContainsExternalCall);
            if cpg.node(site).kind == "New" {
                cpg.add_label(site, Label::ConstructorCall);
            }
            if let Some(caller) = mark_site(cpg, site) {
                queue.push_back(caller);
            }
        }
    }
}

/// Labels the statement and function around `site`; returns the function if it was newly labeled.
fn mark_site(cpg: &mut Cpg, site: NodeId) -> Option<NodeId> {
    if let Some(s) = cpg.enclosing_statement(site) {
        cpg.add_label(s, Label::ContainsExternalCall);
    }
    let f = cpg.enclosing_function(site)?;
    cpg.add_label(f, Label::ContainsExternalCall).then_some(f)
}

/// Declaration a variable-use node refers to.
pub fn referent(cpg: &Cpg, ident: NodeId) -> Option<NodeId> {
    cpg.out_edges(ident, EdgeKind::RefersTo).map(|e| e.dst).next()
}

/// Root identifier node of an lvalue (`a`, `a[k]`, `a[k][j]`).
pub fn lvalue_root_node(cpg: &Cpg, mut lvalue: NodeId) -> Option<NodeId> {
    loop {
        match cpg.node(lvalue).kind.as_str() {
            "Ident" => return Some(lvalue),
            "Index" => lvalue = cpg.children(lvalue)[0],
            _ => return None,
        }
    }
}

/// State variable written through `lvalue`, if any.
pub fn written_state_var(cpg: &Cpg, lvalue: NodeId) -> Option<NodeId> {
    let decl = referent(cpg, lvalue_root_node(cpg, lvalue)?)?;
    cpg.has_label(decl, Label::StateVariable).then_some(decl)
}

/// Lvalue nodes directly mutated by statement `stmt` (assignment target, `++`/`--` operands).
pub fn mutated_lvalues(cpg: &Cpg, stmt: NodeId) -> Vec<NodeId> {
    let mut out = Vec::new();
    if cpg.node(stmt).kind == "Assign" {
        out.push(cpg.children(stmt)[0]);
    }
    for e in cpg.statement_exprs(stmt) {
        let n = cpg.node(e);
        if n.kind == "Unary" && matches!(n.prop_str("op"), Some("++post" | "--post")) {
            out.push(cpg.children(e)[0]);
        }
    }
    out
}

fn via(kind: &str) -> BTreeMap<String, Value> {
    BTreeMap::from([("via".to_string(), Value::from(kind))])
}

fn writes_to(cpg: &Cpg, src: NodeId, sv: NodeId) -> bool {
    cpg.has_edge(EdgeKind::WritesState, src, sv)
}

/// State variables written by `src` (statement or function), directly or transitively.
pub fn written_vars(cpg: &Cpg, src: NodeId) -> BTreeSet<NodeId> {
    cpg.out_edges(src, EdgeKind::WritesState).map(|e| e.dst).collect()
}

/// Adds `StateUpdate` labels and `WritesState` edges, then closes them over internal calls.
pub fn write_state_analysis(cpg: &mut Cpg) {
    write_state_analysis_with(cpg, WorklistOrder::Forward);
}

pub fn write_state_analysis_with(cpg: &mut Cpg, order: WorklistOrder) {
    let stmts: Vec<NodeId> = cpg.nodes_with(Label::Statement).filter(|n| !is_patch(cpg, *n)).collect();
    let mut writers = Vec::new();
    for s in stmts {
        for lv in mutated_lvalues(cpg, s) {
            let Some(sv) = written_state_var(cpg, lv) else { continue };
            cpg.add_label(s, Label::StateUpdate);
            if !writes_to(cpg, s, sv) {
                cpg.add_edge(EdgeKind::WritesState, s, sv, via("direct"));
            }
            if let Some(f) = cpg.enclosing_function(s) {
                if !writes_to(cpg, f, sv) {
                    cpg.add_edge(EdgeKind::WritesState, f, sv, via("direct"));
                }
                if !writers.contains(&f) {
                    writers.push(f);
                }
            }
        }
    }
    let mut queue = seeded(writers, order);
    while let Some(f) = queue.pop_front() {
        let vars = written_vars(cpg, f);
        let sites: Vec<NodeId> = cpg
            .in_edges(f, EdgeKind::CallsTo)
            .map(|e| e.src)
            .filter(|s| cpg.node(*s).kind == "CallInternal" && !is_patch(cpg, *s))
            .collect();
        for site in sites {
            let stmt = cpg.enclosing_statement(site);
            let caller = cpg.enclosing_function(site);
            let mut grew = false;
            for &sv in &vars {
                cpg.add_label(site, Label::StateUpdate);
                if let Some(s) = stmt {
                    cpg.add_label(s, Label::StateUpdate);
                    if !writes_to(cpg, s, sv) {
                        cpg.add_edge(EdgeKind::WritesState, s, sv, via("transitive"));
                    }
                }
                if let Some(c) = caller {
                    if !writes_to(cpg, c, sv) {
                        cpg.add_edge(EdgeKind::WritesState, c, sv, via("transitive"));
                        grew = true;
                    }
                }
            }
            if let (true, Some(c)) = (grew, caller) {
                queue.push_back(c);
            }
        }
    }
}

/// Runs both passes in the fixed pipeline order.
pub fn enrich(cpg: &mut Cpg) {
    call_analysis(cpg);
    write_state_analysis(cpg);
}
