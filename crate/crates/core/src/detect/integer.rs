//! Integer overflow, underflow and truncation sites.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use crate::cpg::{node_type, Cpg, EdgeKind, Label, NodeId};
use crate::frontend::ast::{IntType, TypeExpr};
use crate::frontend::types::cast_is_lossy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum IntBugKind {
    Add,
    Sub,
    Mul,
    UnaryInc,
    UnaryDec,
    Truncation,
}

impl fmt::Display for IntBugKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Position {
    Before,
    LastInLoopBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct MitigationPoint {
    /// A statement; the loop statement for `LastInLoopBody`.
    pub anchor: NodeId,
    pub position: Position,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntegerBug {
    pub kind: IntBugKind,
    /// Arithmetic, unary or cast node; the `Assign` statement for `+=` / `-=`.
    pub expr: NodeId,
    /// Type the operation is computed in; the source type for truncations.
    #[serde(serialize_with = "as_display")]
    pub operand_type: IntType,
    /// Target type of a truncating cast.
    #[serde(serialize_with = "opt_display")]
    pub cast_target: Option<IntType>,
    pub mitigation: MitigationPoint,
    pub chain_parent: Option<NodeId>,
    /// The `BugInteger` node materialized for this bug.
    pub node: NodeId,
}

fn as_display<S: serde::Serializer>(t: &IntType, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(t)
}

fn opt_display<S: serde::Serializer>(t: &Option<IntType>, s: S) -> Result<S::Ok, S::Error> {
    match t {
        Some(t) => s.collect_str(t),
        None => s.serialize_none(),
    }
}

fn int_type_of(cpg: &Cpg, id: NodeId) -> Option<IntType> {
    node_type(cpg, id).as_ref().and_then(TypeExpr::int_type)
}

/// Bug kind and operand type of node `id`, if it is an instrumentable operation.
fn classify(cpg: &Cpg, id: NodeId) -> Option<(IntBugKind, IntType, Option<IntType>)> {
    let n = cpg.node(id);
    match n.kind.as_str() {
        "Binary" => {
            let kind = match n.prop_str("op")? {
                "+" => IntBugKind::Add,
                "-" => IntBugKind::Sub,
                "*" => IntBugKind::Mul,
                _ => return None,
            };
            // literal-only arithmetic is folded exactly and carries no runtime type
            Some((kind, int_type_of(cpg, id)?, None))
        }
        "Unary" => {
            let kind = match n.prop_str("op")? {
                "++post" => IntBugKind::UnaryInc,
                "--post" => IntBugKind::UnaryDec,
                _ => return None,
            };
            Some((kind, int_type_of(cpg, id)?, None))
        }
        "Cast" => {
            let to = int_type_of(cpg, id)?;
            let from = int_type_of(cpg, cpg.children(id)[0])?;
            cast_is_lossy(from, to).then_some((IntBugKind::Truncation, from, Some(to)))
        }
        "Assign" => {
            let kind = match n.prop_str("op")? {
                "+=" => IntBugKind::Add,
                "-=" => IntBugKind::Sub,
                _ => return None,
            };
            Some((kind, int_type_of(cpg, cpg.children(id)[0])?, None))
        }
        _ => None,
    }
}

/// Where the check for an operation at `id` goes.
pub fn mitigation_point(cpg: &Cpg, id: NodeId) -> Option<MitigationPoint> {
    let s = cpg.enclosing_statement(id)?;
    let before = |anchor| Some(MitigationPoint { anchor, position: Position::Before });
    let in_loop = |anchor| Some(MitigationPoint { anchor, position: Position::LastInLoopBody });
    if let Some(p) = cpg.parent(s).filter(|p| cpg.node(*p).kind == "For") {
        let for_node = cpg.node(p);
        // a statement child of a for header is its init or its step
        let is_init = for_node.prop_bool("has_init") && cpg.children(p)[0] == s;
        return if is_init { before(p) } else { in_loop(p) };
    }
    let kind = cpg.node(s).kind.as_str();
    if (kind == "While" || kind == "For") && id != s {
        return in_loop(s);
    }
    before(s)
}

fn post_order(cpg: &Cpg, id: NodeId, out: &mut Vec<NodeId>) {
    for c in cpg.children(id) {
        post_order(cpg, *c, out);
    }
    out.push(id);
}

/// All integer bug sites, innermost first and left to right.
pub fn find_integer_sites(cpg: &mut Cpg) -> Vec<IntegerBug> {
    let mut order = Vec::new();
    for f in cpg.nodes_with(Label::Function).collect::<Vec<_>>() {
        post_order(cpg, f, &mut order);
    }
    let mut bugs = Vec::new();
    for id in order {
        if cpg.has_label(id, Label::Patch) {
            continue;
        }
        let Some((kind, operand_type, cast_target)) = classify(cpg, id) else { continue };
        let Some(mitigation) = mitigation_point(cpg, id) else { continue };
        bugs.push(IntegerBug { kind, expr: id, operand_type, cast_target, mitigation, chain_parent: None, node: 0 });
    }
    let sites: BTreeSet<NodeId> = bugs.iter().map(|b| b.expr).collect();
    for b in &mut bugs {
        let stop = cpg.enclosing_statement(b.expr).and_then(|s| cpg.parent(s));
        b.chain_parent = cpg.ancestors(b.expr).take_while(|a| Some(*a) != stop).find(|a| sites.contains(a));
    }
    for b in &mut bugs {
        b.node = materialize(cpg, b);
    }
    bugs
}

fn materialize(cpg: &mut Cpg, b: &IntegerBug) -> NodeId {
    if let Some(existing) =
        cpg.nodes_with(Label::BugInteger).find(|n| cpg.node(*n).props.get("expr") == Some(&Value::from(b.expr)))
    {
        return existing;
    }
    let props = BTreeMap::from([
        ("kind".to_string(), Value::from(b.kind.to_string())),
        ("expr".to_string(), Value::from(b.expr)),
        ("type".to_string(), Value::from(b.operand_type.to_string())),
    ]);
    let id = cpg.add_node("BugInteger", None, props);
    cpg.add_label(id, Label::BugInteger);
    let role = |r: &str| BTreeMap::from([("role".to_string(), Value::from(r))]);
    cpg.add_edge(EdgeKind::BugRole, id, b.expr, role("expr"));
    cpg.add_edge(EdgeKind::BugRole, id, b.mitigation.anchor, role("anchor"));
    id
}

/// `INTOP <kind> @<line>:<col> type=<T> anchor@<line>`
pub fn report_line(cpg: &Cpg, b: &IntegerBug) -> String {
    let span = cpg.node(b.expr).span.unwrap_or_default();
    format!(
        "INTOP {} @{}:{} type={} anchor@{}",
        b.kind,
        span.line,
        span.col,
        b.operand_type,
        cpg.node(b.mitigation.anchor).line()
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_full;
    use crate::frontend::parse;

    fn sites(body: &str) -> (Cpg, Vec<IntegerBug>) {
        let src = format!("contract C {{ uint r; function f(uint a, uint b, uint c, uint8 n, int8 s) public {{ {body} }} }}");
        let mut cpg = build_full(&parse(&src, "t").unwrap()).unwrap();
        let bugs = find_integer_sites(&mut cpg);
        (cpg, bugs)
    }

    fn kinds(bugs: &[IntegerBug]) -> Vec<IntBugKind> {
        bugs.iter().map(|b| b.kind).collect()
    }

    #[test]
    fn no_arithmetic_no_bugs() {
        assert!(sites("bool x = a > b && c > a;").1.is_empty());
    }

    #[test]
    fn chained_add_mul() {
        let (_, bugs) = sites("r = (a + b) * c;");
        assert_eq!(kinds(&bugs), vec![IntBugKind::Add, IntBugKind::Mul]);
        assert_eq!(bugs[0].chain_parent, Some(bugs[1].expr));
        assert_eq!(bugs[1].chain_parent, None);
        assert_eq!(bugs[0].mitigation, bugs[1].mitigation);
    }

    #[test]
    fn loop_step_moves_to_loop_body() {
        let (cpg, bugs) = sites("for (uint8 i = 0; i < n; i++) { r = r - 1; }");
        assert_eq!(kinds(&bugs), vec![IntBugKind::UnaryInc, IntBugKind::Sub]);
        assert_eq!(bugs[0].mitigation.position, Position::LastInLoopBody);
        assert_eq!(cpg.node(bugs[0].mitigation.anchor).kind, "For");
        assert_eq!(bugs[1].mitigation.position, Position::Before);
    }

    #[test]
    fn truncation_and_widening() {
        let (_, bugs) = sites("uint8 m = uint8(a); uint256 w = uint256(n); uint8 k = uint8(s);");
        assert_eq!(kinds(&bugs), vec![IntBugKind::Truncation, IntBugKind::Truncation]);
        assert_eq!(bugs[1].cast_target, Some(IntType::new(false, 8)));
    }

    #[test]
    fn literal_folding_is_exempt() {
        assert!(sites("uint8 m = 2 + 3;").1.is_empty());
        assert_eq!(sites("r += 1;").1.len(), 1);
    }

    #[test]
    fn report_format() {
        let (cpg, bugs) = sites("uint256 amount = uint256(n) * a;");
        let line = report_line(&cpg, &bugs[0]);
        assert!(line.starts_with("INTOP Mul @1:") && line.ends_with(" type=uint256 anchor@1"), "{line}");
    }
}
