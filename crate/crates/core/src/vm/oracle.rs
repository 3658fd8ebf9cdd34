//! Arbitrary-precision reference evaluation for arithmetic expressions.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::Zero;
use serde::Serialize;
use thiserror::Error;

use crate::frontend::ast::{BinOp, Expr, ExprKind, Literal, UnOp};

use super::value::{exact_arith, ArithError, Value};
use super::world::eval_pure;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WideResult {
    /// Mathematical value with no width limit.
    pub exact: BigInt,
    /// What the interpreter computes.
    pub wrapped: Value,
    /// True when `exact` is outside the static type of the expression.
    pub overflowed: bool,
}

fn domain(msg: impl Into<String>) -> OracleError {
    OracleError::Domain(msg.into())
}

fn exact(e: &Expr, env: &BTreeMap<String, Value>) -> Result<BigInt, OracleError> {
    match &e.kind {
        ExprKind::Literal(Literal::Int(v)) => Ok(v.clone()),
        ExprKind::Ident(n) => {
            env.get(n).and_then(Value::as_int).cloned().ok_or_else(|| domain(format!("`{n}` is not bound to an integer")))
        }
        ExprKind::Binary { op, lhs, rhs } if op.is_arithmetic() => {
            let (a, b) = (exact(lhs, env)?, exact(rhs, env)?);
            if *op == BinOp::Div && b.is_zero() {
                return Err(domain("division by zero"));
            }
            exact_arith(*op, &a, &b, None).map_err(|e: ArithError| domain(e.to_string()))
        }
        ExprKind::Unary { op: UnOp::Neg, operand } => Ok(-exact(operand, env)?),
        // the value of `x++` is the old `x`
        ExprKind::Unary { op: UnOp::PostInc | UnOp::PostDec, operand } => exact(operand, env),
        ExprKind::Cast { operand, .. } => exact(operand, env),
        _ => Err(domain("not an arithmetic expression")),
    }
}

/// Evaluates `expr` both exactly and with the interpreter's wrapping semantics.
pub fn wide_oracle(expr: &Expr, env: &BTreeMap<String, Value>) -> Result<WideResult, OracleError> {
    let exact = exact(expr, env)?;
    let wrapped = eval_pure(expr, env).map_err(OracleError::Domain)?;
    let overflowed = match &wrapped {
        Value::Int(_, t) => !t.contains(&exact),
        _ => false,
    };
    Ok(WideResult { exact, wrapped, overflowed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::ast::IntType;
    use crate::frontend::parse_expr;

    fn env(t: IntType, vals: &[(&str, i64)]) -> BTreeMap<String, Value> {
        vals.iter().map(|(n, v)| (n.to_string(), Value::Int(BigInt::from(*v), t))).collect()
    }

    #[test]
    fn unsigned_addition_overflow() {
        let r = wide_oracle(&parse_expr("a + b").unwrap(), &env(IntType::new(false, 8), &[("a", 200), ("b", 100)])).unwrap();
        assert_eq!(r.exact, BigInt::from(300));
        assert_eq!(r.wrapped, Value::Int(44.into(), IntType::new(false, 8)));
        assert!(r.overflowed);
    }

    #[test]
    fn signed_subtraction_overflow() {
        let t = IntType::new(true, 8);
        let r = wide_oracle(&parse_expr("a - b").unwrap(), &env(t, &[("a", -100), ("b", 100)])).unwrap();
        assert_eq!(r.exact, BigInt::from(-200));
        assert_eq!(r.wrapped, Value::Int(56.into(), t));
        assert!(r.overflowed);
    }

    #[test]
    fn narrowing_cast_loses_value() {
        let r = wide_oracle(&parse_expr("uint8(a)").unwrap(), &env(IntType::new(false, 16), &[("a", 300)])).unwrap();
        assert!(r.overflowed);
        assert_eq!(r.wrapped.as_int(), Some(&BigInt::from(44)));
    }

    #[test]
    fn division_by_zero_is_a_domain_error() {
        let e = env(IntType::new(false, 8), &[("a", 1), ("b", 0)]);
        assert!(wide_oracle(&parse_expr("a / b").unwrap(), &e).is_err());
    }
}
