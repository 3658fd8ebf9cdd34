//! Runtime values and width-aware arithmetic.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::frontend::ast::{BinOp, IntType, Literal, TypeExpr, UnOp};
use crate::frontend::types::{compare, trunc_div};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    /// Integer of a known static type; always within its range.
    Int(BigInt, IntType),
    /// Untyped integer constant; arithmetic on two constants is exact.
    Lit(BigInt),
    Bool(bool),
    Addr(BigUint),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v, _) | Value::Lit(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Addr(a) => write!(f, "0x{a:x}"),
        }
    }
}

impl Serialize for Value {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

/// Arithmetic failure that reverts the current transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArithError {
    DivisionByZero,
    NegativeExponent,
    /// Operands outside what the language allows; a checker bug if reached.
    Ill(String),
}

impl fmt::Display for ArithError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArithError::DivisionByZero => f.write_str("division by zero"),
            ArithError::NegativeExponent => f.write_str("negative exponent"),
            ArithError::Ill(m) => write!(f, "ill-typed operation: {m}"),
        }
    }
}

impl Value {
    pub fn default_for(ty: &TypeExpr) -> Value {
        match ty {
            TypeExpr::UInt(_) | TypeExpr::Int(_) => Value::Int(BigInt::zero(), ty.int_type().expect("integer type")),
            TypeExpr::Bool => Value::Bool(false),
            TypeExpr::Address | TypeExpr::ContractRef(_) => Value::Addr(BigUint::zero()),
            // mappings are never read as a whole
            TypeExpr::Mapping(..) => Value::Bool(false),
        }
    }

    pub fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Int(v) => Value::Lit(v.clone()),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Address(a) => Value::Addr(a.clone()),
        }
    }

    pub fn uint256(v: impl Into<BigInt>) -> Value {
        Value::Int(v.into(), IntType::UINT256)
    }

    /// Integer payload of `Int` and `Lit` values.
    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v, _) | Value::Lit(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_addr(&self) -> Option<&BigUint> {
        match self {
            Value::Addr(a) => Some(a),
            _ => None,
        }
    }

    /// Mapping key representation.
    pub fn key(&self) -> BigInt {
        match self {
            Value::Int(v, _) | Value::Lit(v) => v.clone(),
            Value::Bool(b) => BigInt::from(*b as u8),
            Value::Addr(a) => BigInt::from_biguint(Sign::Plus, a.clone()),
        }
    }

    /// Converts for storage in a slot of type `ty`, wrapping integers to its width.
    pub fn coerce(self, ty: &TypeExpr) -> Value {
        match (ty.int_type(), self) {
            (Some(it), Value::Int(v, _) | Value::Lit(v)) => Value::Int(it.wrap(&v), it),
            (_, v) => v,
        }
    }
}

fn ill(op: &str, a: &Value, b: &Value) -> ArithError {
    ArithError::Ill(format!("{a:?} {op} {b:?}"))
}

/// Static type the operation is computed at, or `None` for constant folding.
pub fn result_type(op: BinOp, a: &Value, b: &Value) -> Option<IntType> {
    match (a, b) {
        (Value::Int(_, t), _) if op == BinOp::Pow => Some(*t),
        (Value::Lit(_), Value::Int(..)) if op == BinOp::Pow => Some(IntType::UINT256),
        (Value::Int(_, x), Value::Int(_, y)) => Some(IntType::new(x.signed, x.bits.max(y.bits))),
        (Value::Int(_, t), Value::Lit(_)) | (Value::Lit(_), Value::Int(_, t)) => Some(*t),
        _ => None,
    }
}

/// Exact result of an arithmetic operator, before wrapping.
pub fn exact_arith(op: BinOp, a: &BigInt, b: &BigInt, modulus_bits: Option<u16>) -> Result<BigInt, ArithError> {
    Ok(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.is_zero() {
                return Err(ArithError::DivisionByZero);
            }
            trunc_div(a, b)
        }
        BinOp::Pow => {
            if b.is_negative() {
                return Err(ArithError::NegativeExponent);
            }
            match modulus_bits {
                // only the low bits survive wrapping, so reduce as we go
                Some(bits) => {
                    let m = BigInt::one() << bits as usize;
                    let base = ((a % &m) + &m) % &m;
                    base.modpow(b, &m)
                }
                None => {
                    let e = b.to_u32().ok_or_else(|| ArithError::Ill("exponent too large".into()))?;
                    num_traits::pow(a.clone(), e as usize)
                }
            }
        }
        _ => return Err(ArithError::Ill(format!("{op:?} is not arithmetic"))),
    })
}

/// Binary operator with the interpreter's semantics. `And`/`Or` are evaluated
/// here strictly; the interpreter short-circuits before calling this.
pub fn binary(op: BinOp, a: &Value, b: &Value) -> Result<Value, ArithError> {
    if op.is_arithmetic() {
        let (x, y) = match (a.as_int(), b.as_int()) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(ill(op.as_str(), a, b)),
        };
        return Ok(match result_type(op, a, b) {
            Some(t) => Value::Int(t.wrap(&exact_arith(op, x, y, Some(t.bits))?), t),
            None => Value::Lit(exact_arith(op, x, y, None)?),
        });
    }
    if op.is_comparison() {
        return match (a, b) {
            (Value::Bool(x), Value::Bool(y)) if matches!(op, BinOp::Eq | BinOp::Ne) => {
                Ok(Value::Bool((x == y) == (op == BinOp::Eq)))
            }
            (Value::Addr(x), Value::Addr(y)) if matches!(op, BinOp::Eq | BinOp::Ne) => {
                Ok(Value::Bool((x == y) == (op == BinOp::Eq)))
            }
            _ => match (a.as_int(), b.as_int()) {
                (Some(x), Some(y)) => Ok(Value::Bool(compare(op, x, y))),
                _ => Err(ill(op.as_str(), a, b)),
            },
        };
    }
    match (op, a, b) {
        (BinOp::And, Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(*x && *y)),
        (BinOp::Or, Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(*x || *y)),
        _ => Err(ill(op.as_str(), a, b)),
    }
}

/// `!` and unary minus. Increments are lvalue operations handled by the interpreter.
pub fn unary(op: UnOp, v: &Value) -> Result<Value, ArithError> {
    match (op, v) {
        (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
        (UnOp::Neg, Value::Int(x, t)) => Ok(Value::Int(t.wrap(&-x), *t)),
        (UnOp::Neg, Value::Lit(x)) => Ok(Value::Lit(-x)),
        (UnOp::PostInc | UnOp::PostDec, Value::Int(x, t)) => {
            let d = if op == UnOp::PostInc { 1 } else { -1 };
            Ok(Value::Int(t.wrap(&(x + d)), *t))
        }
        _ => Err(ArithError::Ill(format!("{}{v:?}", op.as_str()))),
    }
}

pub fn cast(target: &TypeExpr, v: &Value) -> Result<Value, ArithError> {
    match (target.int_type(), v.as_int()) {
        (Some(t), Some(x)) => Ok(Value::Int(t.wrap(x), t)),
        _ => Err(ArithError::Ill(format!("cast of {v:?} to {target}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u8v(v: i64) -> Value {
        Value::Int(BigInt::from(v), IntType::new(false, 8))
    }

    #[test]
    fn typed_addition_wraps_at_width() {
        assert_eq!(binary(BinOp::Add, &u8v(200), &u8v(100)).unwrap(), u8v(44));
        assert_eq!(binary(BinOp::Add, &u8v(200), &Value::Lit(100.into())).unwrap(), u8v(44));
    }

    #[test]
    fn constants_fold_exactly() {
        assert_eq!(binary(BinOp::Add, &Value::Lit(200.into()), &Value::Lit(100.into())).unwrap(), Value::Lit(300.into()));
    }

    #[test]
    fn signed_min_div_minus_one_wraps() {
        let t = IntType::new(true, 8);
        let r = binary(BinOp::Div, &Value::Int((-128).into(), t), &Value::Int((-1).into(), t)).unwrap();
        assert_eq!(r, Value::Int((-128).into(), t));
    }

    #[test]
    fn wider_operand_sets_result_type() {
        let a = Value::Int(255.into(), IntType::new(false, 8));
        let b = Value::Int(1.into(), IntType::new(false, 16));
        assert_eq!(binary(BinOp::Add, &a, &b).unwrap(), Value::Int(256.into(), IntType::new(false, 16)));
    }

    #[test]
    fn pow_reduces_modulo_width() {
        let r = binary(BinOp::Pow, &u8v(3), &u8v(200)).unwrap();
        let expect: BigInt = num_traits::pow(BigInt::from(3), 200) % 256;
        assert_eq!(r, u8v(expect.to_i64().unwrap()));
    }

    #[test]
    fn division_by_zero_errors() {
        assert_eq!(binary(BinOp::Div, &u8v(1), &u8v(0)), Err(ArithError::DivisionByZero));
    }
}
