//! Runtime check formulas for integer operations.

use crate::cpg::{node_type, Cpg};
use crate::detect::{IntBugKind, IntegerBug};
use crate::frontend::ast::*;

use super::HardenError;

/// Shape of the emitted check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CheckForm {
    /// Re-evaluates the operation; valid anywhere before the statement.
    #[default]
    Inline,
    /// `c >= a` for an unsigned `c = a + b`; only valid after the assignment.
    PostAssignment,
}

fn bin(op: BinOp, l: Expr, r: Expr) -> Expr {
    Expr::binary(op, l, r)
}

fn not(e: Expr) -> Expr {
    Expr::unary(UnOp::Not, e)
}

fn and(l: Expr, r: Expr) -> Expr {
    bin(BinOp::And, l, r)
}

fn or(l: Expr, r: Expr) -> Expr {
    bin(BinOp::Or, l, r)
}

fn zero() -> Expr {
    Expr::int(0)
}

/// Add/Sub/Mul/Inc/Dec check for operands `a`, `b` evaluated at type `t`.
pub fn arithmetic_check(kind: IntBugKind, t: IntType, a: Expr, b: Expr) -> Expr {
    use BinOp::*;
    match (kind, t.signed) {
        (IntBugKind::Add, false) => bin(Ge, bin(Add, a.clone(), b), a),
        (IntBugKind::Add, true) => {
            let pos = or(
                not(and(bin(Gt, a.clone(), zero()), bin(Gt, b.clone(), zero()))),
                bin(Ge, bin(Add, a.clone(), b.clone()), a.clone()),
            );
            let neg = or(not(and(bin(Lt, a.clone(), zero()), bin(Lt, b.clone(), zero()))), bin(Le, bin(Add, a.clone(), b), a));
            and(pos, neg)
        }
        (IntBugKind::Sub, false) => bin(Le, bin(Sub, a.clone(), b), a),
        (IntBugKind::Sub, true) => {
            let up = or(
                not(and(bin(Ge, a.clone(), zero()), bin(Lt, b.clone(), zero()))),
                bin(Ge, bin(Sub, a.clone(), b.clone()), a.clone()),
            );
            let down = or(not(and(bin(Lt, a.clone(), zero()), bin(Gt, b.clone(), zero()))), bin(Le, bin(Sub, a.clone(), b), a));
            and(up, down)
        }
        (IntBugKind::Mul, signed) => {
            let base = or(bin(Eq, a.clone(), zero()), bin(Eq, bin(Div, bin(Mul, a.clone(), b.clone()), a.clone()), b.clone()));
            if signed {
                // MIN * -1 wraps to MIN and MIN / -1 wraps back, so the quotient test alone misses it
                and(base, not(and(bin(Eq, a, Expr::int(-1)), bin(Eq, b, Expr::int(t.min_value())))))
            } else {
                base
            }
        }
        (IntBugKind::UnaryInc, _) => bin(Ge, bin(Add, a.clone(), Expr::int(1)), a),
        (IntBugKind::UnaryDec, _) => bin(Le, bin(Sub, a.clone(), Expr::int(1)), a),
        (IntBugKind::Truncation, _) => unreachable!("truncation checks use cast_check"),
    }
}

/// Round-trip check for casting `x` from `from` to `to`, plus a sign test when signedness changes.
pub fn cast_check(from: IntType, to: IntType, x: Expr) -> Expr {
    let round_trip = bin(BinOp::Eq, x.clone(), Expr::cast(from.as_type(), Expr::cast(to.as_type(), x.clone())));
    match (from.signed, to.signed) {
        (true, false) => and(round_trip, bin(BinOp::Ge, x, zero())),
        (false, true) => and(round_trip, bin(BinOp::Ge, Expr::cast(to.as_type(), x), zero())),
        _ => round_trip,
    }
}

/// Operand as an expression at type `t`: widened with a cast when its own type differs.
fn operand(cpg: &Cpg, id: usize, t: IntType) -> Expr {
    let e = cpg.expr(id);
    match node_type(cpg, id).as_ref().and_then(TypeExpr::int_type) {
        Some(own) if own != t => Expr::cast(t.as_type(), e),
        _ => e,
    }
}

/// Builds the check expression for `bug`; the expression is true iff the operation is safe.
pub fn make_integer_check(cpg: &Cpg, bug: &IntegerBug, form: CheckForm) -> Result<Expr, HardenError> {
    let node = cpg.node(bug.expr);
    let kids = cpg.children(bug.expr);
    let line = node.line();
    let t = bug.operand_type;
    let ops: Vec<Expr> = match (bug.kind, node.kind.as_str()) {
        (IntBugKind::Truncation, "Cast") => vec![cpg.expr(kids[0])],
        (_, "Binary") | (_, "Assign") => vec![operand(cpg, kids[0], t), operand(cpg, kids[1], t)],
        (_, "Unary") => vec![cpg.expr(kids[0])],
        (_, other) => return Err(HardenError::UnsupportedType(format!("cannot check a {other} node"))),
    };
    if ops.iter().any(Expr::has_side_effects) {
        return Err(HardenError::SideEffectingOperand { line });
    }
    let mut ops = ops.into_iter();
    let a = ops.next().expect("at least one operand");
    if bug.kind == IntBugKind::Truncation {
        let to = bug.cast_target.ok_or_else(|| HardenError::UnsupportedType("cast without target".into()))?;
        return Ok(cast_check(t, to, a));
    }
    let b = ops.next().unwrap_or_else(|| Expr::int(1));
    if form == CheckForm::PostAssignment && bug.kind == IntBugKind::Add && !t.signed {
        if let Some(c) = assignment_target(cpg, bug) {
            return Ok(bin(BinOp::Ge, c, a));
        }
    }
    Ok(arithmetic_check(bug.kind, t, a, b))
}

/// `c` for a statement `c = a + b` whose target is a fresh name not read by the operands.
fn assignment_target(cpg: &Cpg, bug: &IntegerBug) -> Option<Expr> {
    let parent = cpg.parent(bug.expr)?;
    let pn = cpg.node(parent);
    let is_rhs = pn.kind == "Assign" && pn.prop_str("op") == Some("=") && cpg.children(parent)[1] == bug.expr;
    if !is_rhs {
        return None;
    }
    let lhs = cpg.expr(cpg.children(parent)[0]);
    let ExprKind::Ident(name) = &lhs.kind else { return None };
    let rhs = cpg.expr(bug.expr);
    let mut aliased = false;
    rhs.walk(&mut |e| aliased |= matches!(&e.kind, ExprKind::Ident(n) if n == name));
    (!aliased).then_some(lhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::emit::expr_to_string;

    #[test]
    fn bec_multiplication_check_text() {
        let a = Expr::cast(TypeExpr::UInt(256), Expr::ident("cnt"));
        let check = arithmetic_check(IntBugKind::Mul, IntType::UINT256, a, Expr::ident("_value"));
        assert_eq!(expr_to_string(&check), "(uint256(cnt) == 0) || ((uint256(cnt) * _value / uint256(cnt)) == _value)");
    }

    #[test]
    fn truncation_check_text() {
        let check = cast_check(IntType::UINT256, IntType::new(false, 8), Expr::ident("n"));
        assert_eq!(expr_to_string(&check), "n == uint256(uint8(n))");
    }
}
