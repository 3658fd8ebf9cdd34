//! Assertion insertion for integer bugs.

use serde::Serialize;

use crate::cpg::{Cpg, NodeId};
use crate::detect::{IntegerBug, MitigationPoint, Position};
use crate::emit::expr_to_string;
use crate::frontend::ast::{BinOp, Expr, Stmt, StmtKind};

use super::{child_index, insert_stmt, make_integer_check, refresh, CheckForm, HardenError, Patch, PatchKind};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct IntegerOutcome {
    pub patches: Vec<Patch>,
    /// Bug nodes left without a check, with the reason.
    pub unhardened: Vec<(NodeId, String)>,
}

/// True when the statement just before `index` already asserts `cond`, as left by an
/// earlier hardening run.
fn already_checked(cpg: &Cpg, block: NodeId, index: usize, cond: &Expr) -> bool {
    let Some(&prev) = index.checked_sub(1).and_then(|i| cpg.children(block).get(i)) else { return false };
    matches!(cpg.stmt(prev).kind, StmtKind::Assert(e) if expr_to_string(&e) == expr_to_string(cond))
}

/// Inserts one assertion per mitigation point, conjoining its checks in bug order.
pub fn harden_integer(cpg: &mut Cpg, bugs: &[IntegerBug]) -> Result<IntegerOutcome, HardenError> {
    let mut out = IntegerOutcome::default();
    let mut groups: Vec<(MitigationPoint, Vec<Expr>, NodeId)> = Vec::new();
    for bug in bugs {
        let check = match make_integer_check(cpg, bug, CheckForm::Inline) {
            Ok(c) => c,
            Err(e @ (HardenError::SideEffectingOperand { .. } | HardenError::UnsupportedType(_))) => {
                out.unhardened.push((bug.node, e.to_string()));
                continue;
            }
            Err(e) => return Err(e),
        };
        match groups.iter_mut().find(|g| g.0 == bug.mitigation) {
            Some(g) => g.1.push(check),
            None => groups.push((bug.mitigation, vec![check], bug.node)),
        }
    }
    for (point, checks, bug) in groups {
        let cond = checks.into_iter().reduce(|acc, c| Expr::binary(BinOp::And, acc, c)).expect("non-empty group");
        let (block, index) = match point.position {
            Position::Before => {
                let block = cpg.parent(point.anchor).expect("anchors sit in blocks");
                (block, child_index(cpg, block, point.anchor))
            }
            Position::LastInLoopBody => {
                let body = *cpg.children(point.anchor).last().expect("loops have a body");
                (body, cpg.children(body).len())
            }
        };
        if already_checked(cpg, block, index, &cond) {
            continue;
        }
        let id = insert_stmt(cpg, block, index, Stmt::new(StmtKind::Assert(cond)), bug);
        out.patches.push(Patch {
            kind: PatchKind::IntegerAssert,
            inserted_nodes: vec![id],
            bug,
            anchor_line: cpg.node(point.anchor).line(),
        });
    }
    if !out.patches.is_empty() {
        refresh(cpg)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpg::build_full;
    use crate::detect::find_integer_sites;
    use crate::emit::{emit_source, EmitConfig};
    use crate::frontend::parse;

    fn harden(body: &str) -> String {
        let src = format!("contract C {{ uint r; function f(uint a, uint b, uint c, uint8 n) public {{ {body} }} }}");
        let mut cpg = build_full(&parse(&src, "t").unwrap()).unwrap();
        let bugs = find_integer_sites(&mut cpg);
        harden_integer(&mut cpg, &bugs).unwrap();
        emit_source(&cpg, &EmitConfig::default())
    }

    #[test]
    fn chained_check_is_one_assert() {
        let out = harden("r = (a + b) * c;");
        assert_eq!(out.matches("assert(").count(), 1, "{out}");
        assert!(out.contains("assert(((a + b) >= a) && (((a + b) == 0) || (((a + b) * c / (a + b)) == c)));"), "{out}");
    }

    #[test]
    fn loop_step_check_is_last_in_body() {
        let out = harden("for (uint8 i = 0; i < n; i++) { r = r - 1; }");
        let body: Vec<&str> = out.lines().map(str::trim).collect();
        let sub = body.iter().position(|l| *l == "assert((r - 1) <= r);").unwrap();
        assert_eq!(body[sub + 1], "r = r - 1;");
        assert_eq!(body[sub + 2], "assert((i + 1) >= i);");
    }

    #[test]
    fn no_arithmetic_no_insertion() {
        let out = harden("r = a;");
        assert!(!out.contains("assert"));
    }

    #[test]
    fn existing_check_is_not_repeated() {
        let out = harden("assert((a + b) >= a); /* HCC */\n r = a + b;");
        assert_eq!(out.matches("assert(").count(), 1, "{out}");
    }

    #[test]
    fn side_effecting_operand_is_skipped() {
        let src = "contract C { uint r; function g() internal returns (uint) { return 1; } function f(uint a) public { r = g() + a; } }";
        let mut cpg = build_full(&parse(src, "t").unwrap()).unwrap();
        let bugs = find_integer_sites(&mut cpg);
        let out = harden_integer(&mut cpg, &bugs).unwrap();
        assert_eq!(out.unhardened.len(), 1);
        assert!(out.patches.is_empty());
    }
}
