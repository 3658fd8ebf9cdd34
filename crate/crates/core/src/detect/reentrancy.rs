//! Reentrancy pattern queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use crate::cpg::{cfg_reachable_set, Cpg, EdgeKind, Label, NodeId};
use crate::enrich::written_vars;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum ReentrancyKind {
    SameFunction,
    CrossFunction,
    DelegateAsCall,
    DelegateAsUpdate,
    CreateBased,
}

impl fmt::Display for ReentrancyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ReentrancyBug {
    pub kind: ReentrancyKind,
    /// Statement performing the external (or constructor) call.
    pub external_call: NodeId,
    /// The call expression inside `external_call`.
    pub call_expr: NodeId,
    /// First statement writing `variable` after the call; the delegate-call statement for `DelegateAsUpdate`.
    pub state_update: NodeId,
    pub variable: Option<NodeId>,
    pub enclosing_function: NodeId,
    pub writer_functions: BTreeSet<NodeId>,
    /// The `BugReentrancy` node materialized for this bug.
    pub node: NodeId,
}

fn is_patch(cpg: &Cpg, id: NodeId) -> bool {
    cpg.has_label(id, Label::Patch)
}

/// Call expressions owned by statement `s` that can hand control to outside code.
fn call_exprs(cpg: &Cpg, s: NodeId) -> Vec<NodeId> {
    cpg.statement_exprs(s)
        .into_iter()
        .filter(|e| cpg.has_label(*e, Label::ExternalCall) || cpg.has_label(*e, Label::ContainsExternalCall))
        .collect()
}

fn owns_delegate_call(cpg: &Cpg, s: NodeId) -> bool {
    cpg.statement_exprs(s).into_iter().any(|e| cpg.has_label(e, Label::DelegateCall))
}

fn direct_write(cpg: &Cpg, s: NodeId, sv: NodeId) -> bool {
    cpg.out_edges(s, EdgeKind::WritesState).any(|e| e.dst == sv && e.props.get("via") == Some(&Value::from("direct")))
}

/// Non-constructor functions of `contract` writing `sv`.
fn writers_of(cpg: &Cpg, contract: NodeId, sv: NodeId) -> BTreeSet<NodeId> {
    cpg.children(contract)
        .iter()
        .copied()
        .filter(|f| cpg.has_label(*f, Label::Function) && !cpg.node(*f).prop_bool("constructor"))
        .filter(|f| cpg.has_edge(EdgeKind::WritesState, *f, sv))
        .collect()
}

fn call_kind(cpg: &Cpg, calls: &[NodeId]) -> Option<ReentrancyKind> {
    if calls.iter().any(|c| cpg.node(*c).kind == "New" && cpg.has_label(*c, Label::ConstructorCall)) {
        Some(ReentrancyKind::CreateBased)
    } else if calls.iter().any(|c| cpg.has_label(*c, Label::DelegateCall)) {
        Some(ReentrancyKind::DelegateAsCall)
    } else {
        None
    }
}

/// Finds all reentrancy bugs and materializes a `BugReentrancy` node per bug.
pub fn find_reentrancy(cpg: &mut Cpg) -> Vec<ReentrancyBug> {
    let mut bugs = Vec::new();
    let functions: Vec<NodeId> =
        cpg.nodes_with(Label::Function).filter(|f| !cpg.node(*f).prop_bool("constructor") && !is_patch(cpg, *f)).collect();
    for f in functions {
        let stmts: Vec<NodeId> = cpg.subtree(f).into_iter().filter(|n| cpg.is_statement(*n) && !is_patch(cpg, *n)).collect();
        let contract = cpg.enclosing_contract(f).expect("functions live in contracts");
        for &c in stmts.iter().filter(|s| cpg.has_label(**s, Label::ContainsExternalCall)) {
            let calls = call_exprs(cpg, c);
            let Some(&call_expr) = calls.first() else { continue };
            let reach = cfg_reachable_set(cpg, c);
            // earliest write per variable
            let mut first_write: BTreeMap<NodeId, NodeId> = BTreeMap::new();
            let mut first_delegate: Option<NodeId> = None;
            for &w in &stmts {
                let after = reach[w];
                for sv in written_vars(cpg, w) {
                    let same_stmt = w == c && cpg.node(c).kind == "Assign" && direct_write(cpg, c, sv);
                    if after || same_stmt {
                        first_write.entry(sv).and_modify(|x| *x = (*x).min(w)).or_insert(w);
                    }
                }
                if after && w != c && owns_delegate_call(cpg, w) {
                    first_delegate = Some(first_delegate.map_or(w, |d| d.min(w)));
                }
            }
            for (sv, w) in first_write {
                let writers = writers_of(cpg, contract, sv);
                let kind = call_kind(cpg, &calls).unwrap_or(if writers.iter().any(|x| *x != f) {
                    ReentrancyKind::CrossFunction
                } else {
                    ReentrancyKind::SameFunction
                });
                bugs.push(ReentrancyBug {
                    kind,
                    external_call: c,
                    call_expr,
                    state_update: w,
                    variable: Some(sv),
                    enclosing_function: f,
                    writer_functions: writers,
                    node: 0,
                });
            }
            if let Some(w) = first_delegate {
                bugs.push(ReentrancyBug {
                    kind: ReentrancyKind::DelegateAsUpdate,
                    external_call: c,
                    call_expr,
                    state_update: w,
                    variable: None,
                    enclosing_function: f,
                    writer_functions: BTreeSet::new(),
                    node: 0,
                });
            }
        }
    }
    bugs.sort_by_key(|b| (b.enclosing_function, b.external_call, b.state_update, b.variable));
    for b in &mut bugs {
        b.node = materialize(cpg, b);
    }
    bugs
}

fn role(name: &str) -> BTreeMap<String, Value> {
    BTreeMap::from([("role".to_string(), Value::from(name))])
}

fn materialize(cpg: &mut Cpg, b: &ReentrancyBug) -> NodeId {
    let key = |n: &crate::cpg::CpgNode| {
        n.props.get("external_call") == Some(&Value::from(b.external_call))
            && n.props.get("state_update") == Some(&Value::from(b.state_update))
            && n.props.get("variable") == Some(&b.variable.map_or(Value::Null, Value::from))
    };
    if let Some(existing) = cpg.nodes_with(Label::BugReentrancy).find(|n| key(cpg.node(*n))) {
        return existing;
    }
    let props = BTreeMap::from([
        ("kind".to_string(), Value::from(b.kind.to_string())),
        ("external_call".to_string(), Value::from(b.external_call)),
        ("state_update".to_string(), Value::from(b.state_update)),
        ("variable".to_string(), b.variable.map_or(Value::Null, Value::from)),
    ]);
    let id = cpg.add_node("BugReentrancy", None, props);
    cpg.add_label(id, Label::BugReentrancy);
    cpg.add_edge(EdgeKind::BugRole, id, b.external_call, role("external_call"));
    cpg.add_edge(EdgeKind::BugRole, id, b.state_update, role("state_update"));
    if let Some(sv) = b.variable {
        cpg.add_edge(EdgeKind::BugRole, id, sv, role("variable"));
    }
    for w in &b.writer_functions {
        cpg.add_edge(EdgeKind::BugRole, id, *w, role("writer"));
    }
    id
}

/// `REENTRANCY <kind> fn=<name> call@<line> write@<line> var=<name>`
pub fn report_line(cpg: &Cpg, b: &ReentrancyBug) -> String {
    let var = b.variable.and_then(|v| cpg.node(v).name()).unwrap_or("-");
    format!(
        "REENTRANCY {} fn={} call@{} write@{} var={}",
        b.kind,
        cpg.node(b.enclosing_function).name().unwrap_or("?"),
        cpg.node(b.external_call).line(),
        cpg.node(b.state_update).line(),
        var
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_full;
    use crate::enrich::enrich;
    use crate::frontend::parse;

    fn detect(src: &str) -> (Cpg, Vec<ReentrancyBug>) {
        let mut cpg = build_full(&parse(src, "t").unwrap()).unwrap();
        enrich(&mut cpg);
        let bugs = find_reentrancy(&mut cpg);
        (cpg, bugs)
    }

    #[test]
    fn call_last_is_clean() {
        let (_, bugs) = detect(
            "contract C { mapping(address => uint) b; function w(uint a) public { b[msg.sender] -= a; msg.sender.transfer(a); } }",
        );
        assert!(bugs.is_empty());
    }

    #[test]
    fn same_function_withdraw_to() {
        let (cpg, bugs) = detect(
            "contract V { mapping(address => uint256) balance;
               function withdrawTo(uint amount, address to) public {
                 if (balance[msg.sender] >= amount) { to.call.value(amount)(\"\"); balance[msg.sender] -= amount; } } }",
        );
        assert_eq!(bugs.len(), 1);
        assert_eq!(bugs[0].kind, ReentrancyKind::SameFunction);
        assert_eq!(report_line(&cpg, &bugs[0]), "REENTRANCY SameFunction fn=withdrawTo call@3 write@3 var=balance");
    }

    #[test]
    fn delegate_as_update() {
        let (_, bugs) =
            detect("contract C { address lib; function f(address e) public { e.call.value(0)(\"\"); lib.delegatecall(); } }");
        assert_eq!(bugs.len(), 1);
        assert_eq!(bugs[0].kind, ReentrancyKind::DelegateAsUpdate);
        assert_eq!(bugs[0].variable, None);
    }

    #[test]
    fn write_in_same_assignment_as_call() {
        let (_, bugs) = detect(
            "abstract contract O { function get() public virtual returns (uint); }
             contract C { O o; uint x; function f() public { x = o.get(); } }",
        );
        assert_eq!(bugs.len(), 1);
        assert_eq!(bugs[0].external_call, bugs[0].state_update);
    }

    #[test]
    fn detection_is_idempotent() {
        let src = "contract C { uint x; function f(address a) public { a.transfer(1); x = 1; } }";
        let mut cpg = build_full(&parse(src, "t").unwrap()).unwrap();
        enrich(&mut cpg);
        let first = find_reentrancy(&mut cpg);
        let count = cpg.node_count();
        let second = find_reentrancy(&mut cpg);
        assert_eq!(first, second);
        assert_eq!(cpg.node_count(), count);
    }
}
