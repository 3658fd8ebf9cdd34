//! Static typing rules shared by the checker, the graph builder and the interpreter.
//!
//! Integer literals stay untyped (exact) until they meet a typed operand, at
//! which point they adopt that operand's type. Two typed integers combine to
//! the wider of the two; mixing signedness is rejected.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive, Zero};

use super::ast::*;
use super::Diagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Ty {
    Known(TypeExpr),
    /// Compile-time integer constant of unbounded precision.
    Literal(BigInt),
    Void,
}

impl Ty {
    pub fn int_type(&self) -> Option<IntType> {
        match self {
            Ty::Known(t) => t.int_type(),
            _ => None,
        }
    }

    pub fn is_bool(&self) -> bool {
        matches!(self, Ty::Known(TypeExpr::Bool))
    }

    pub fn is_integer(&self) -> bool {
        matches!(self, Ty::Literal(_)) || self.int_type().is_some()
    }

    pub fn describe(&self) -> String {
        match self {
            Ty::Known(t) => t.to_string(),
            Ty::Literal(v) => format!("literal {v}"),
            Ty::Void => "void".into(),
        }
    }
}

/// Operand type both sides are converted to before an arithmetic or comparison op.
pub fn common_int(lhs: &Ty, rhs: &Ty) -> Result<Option<IntType>, String> {
    match (lhs, rhs) {
        (Ty::Literal(_), Ty::Literal(_)) => Ok(None),
        (Ty::Known(t), Ty::Literal(v)) | (Ty::Literal(v), Ty::Known(t)) => {
            let it = t.int_type().ok_or_else(|| format!("expected integer, found {t}"))?;
            if !it.contains(v) {
                return Err(format!("literal {v} does not fit {it}"));
            }
            Ok(Some(it))
        }
        (Ty::Known(a), Ty::Known(b)) => {
            let (x, y) = match (a.int_type(), b.int_type()) {
                (Some(x), Some(y)) => (x, y),
                _ => return Err(format!("expected integers, found {a} and {b}")),
            };
            if x.signed != y.signed {
                return Err(format!("cannot combine {x} and {y}"));
            }
            Ok(Some(IntType::new(x.signed, x.bits.max(y.bits))))
        }
        _ => Err("expected integer operands".into()),
    }
}

/// Exact arithmetic on constants; `None` when the operation is undefined.
pub fn fold_arith(op: BinOp, a: &BigInt, b: &BigInt) -> Option<BigInt> {
    Some(match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => {
            if b.is_zero() {
                return None;
            }
            trunc_div(a, b)
        }
        BinOp::Pow => {
            if b.is_negative() {
                return None;
            }
            let e = b.to_u32().filter(|e| *e <= 4096)?;
            num_traits::pow(a.clone(), e as usize)
        }
        _ => return None,
    })
}

/// Division rounding toward zero.
pub fn trunc_div(a: &BigInt, b: &BigInt) -> BigInt {
    let (q, r) = a.div_rem(b);
    debug_assert!(r.is_zero() || r.sign() == a.sign());
    q
}

pub fn compare(op: BinOp, a: &BigInt, b: &BigInt) -> bool {
    match op {
        BinOp::Lt => a < b,
        BinOp::Le => a <= b,
        BinOp::Gt => a > b,
        BinOp::Ge => a >= b,
        BinOp::Eq => a == b,
        BinOp::Ne => a != b,
        _ => unreachable!("not a comparison"),
    }
}

/// Whether a value of type `from` can be stored in a slot of type `to`.
pub fn assignable(from: &Ty, to: &TypeExpr) -> bool {
    match (from, to) {
        (Ty::Literal(v), t) => t.int_type().is_some_and(|it| it.contains(v)),
        (Ty::Known(f), t) if f == t => !t.is_mapping(),
        (Ty::Known(f), t) if f.is_address_like() && t.is_address_like() => true,
        (Ty::Known(f), t) => match (f.int_type(), t.int_type()) {
            (Some(a), Some(b)) => a.signed == b.signed && a.bits <= b.bits,
            _ => false,
        },
        _ => false,
    }
}

/// True when a cast from `from` to `to` can lose information.
pub fn cast_is_lossy(from: IntType, to: IntType) -> bool {
    if from.signed == to.signed {
        to.bits < from.bits
    } else {
        !(to.contains(&from.min_value()) && to.contains(&from.max_value()))
    }
}

#[derive(Debug, Clone)]
pub struct FunctionSig {
    pub params: Vec<TypeExpr>,
    pub returns: Option<TypeExpr>,
    pub visibility: Visibility,
}

#[derive(Debug, Clone, Default)]
pub struct ContractInfo {
    pub state_vars: BTreeMap<String, TypeExpr>,
    pub functions: BTreeMap<String, FunctionSig>,
    pub constructor_params: Vec<TypeExpr>,
}

/// Declarations visible across a unit, used to type calls and state accesses.
#[derive(Debug, Clone, Default)]
pub struct UnitInfo {
    pub contracts: BTreeMap<String, ContractInfo>,
}

impl UnitInfo {
    pub fn new(unit: &SourceUnit) -> Self {
        let mut contracts = BTreeMap::new();
        for c in &unit.contracts {
            let mut info = ContractInfo::default();
            for v in &c.state_vars {
                info.state_vars.entry(v.name.clone()).or_insert_with(|| v.ty.clone());
            }
            for f in &c.functions {
                info.functions.entry(f.name.clone()).or_insert_with(|| FunctionSig {
                    params: f.params.iter().map(|p| p.ty.clone()).collect(),
                    returns: f.returns.clone(),
                    visibility: f.visibility,
                });
            }
            if let Some(ctor) = &c.constructor {
                info.constructor_params = ctor.params.iter().map(|p| p.ty.clone()).collect();
            }
            contracts.entry(c.name.clone()).or_insert(info);
        }
        UnitInfo { contracts }
    }
}

/// Block-structured local scopes.
#[derive(Debug, Clone)]
pub struct Scopes<T> {
    frames: Vec<HashMap<String, (TypeExpr, T)>>,
}

impl<T: Clone> Default for Scopes<T> {
    fn default() -> Self {
        Scopes { frames: vec![HashMap::new()] }
    }
}

impl<T: Clone> Scopes<T> {
    pub fn push(&mut self) {
        self.frames.push(HashMap::new());
    }

    pub fn pop(&mut self) {
        self.frames.pop();
    }

    /// Declares in the innermost frame; returns false on redeclaration in that frame.
    pub fn declare(&mut self, name: &str, ty: TypeExpr, payload: T) -> bool {
        let frame = self.frames.last_mut().expect("scope stack is never empty");
        if frame.contains_key(name) {
            return false;
        }
        frame.insert(name.to_string(), (ty, payload));
        true
    }

    pub fn lookup(&self, name: &str) -> Option<&(TypeExpr, T)> {
        self.frames.iter().rev().find_map(|f| f.get(name))
    }
}

/// Typing context for one function body.
pub struct ExprCx<'a, T> {
    pub unit: &'a UnitInfo,
    pub contract: &'a str,
    pub locals: &'a Scopes<T>,
}

fn type_err(span: Span, message: impl Into<String>) -> Diagnostic {
    Diagnostic::type_error(span, message)
}

impl<'a, T: Clone> ExprCx<'a, T> {
    fn contract_info(&self) -> Option<&'a ContractInfo> {
        self.unit.contracts.get(self.contract)
    }

    /// Type of a variable name: locals shadow state variables.
    pub fn var_type(&self, name: &str) -> Option<TypeExpr> {
        if let Some((ty, _)) = self.locals.lookup(name) {
            return Some(ty.clone());
        }
        self.contract_info().and_then(|c| c.state_vars.get(name).cloned())
    }

    fn check_args(&self, span: Span, params: &[TypeExpr], args: &[Expr]) -> Result<(), Diagnostic> {
        if params.len() != args.len() {
            return Err(type_err(span, format!("expected {} arguments, found {}", params.len(), args.len())));
        }
        for (p, a) in params.iter().zip(args) {
            let ty = self.expr_type(a)?;
            if !assignable(&ty, p) {
                return Err(type_err(a.span, format!("argument of type {} is not convertible to {p}", ty.describe())));
            }
        }
        Ok(())
    }

    fn expect_address(&self, e: &Expr) -> Result<(), Diagnostic> {
        match self.expr_type(e)? {
            Ty::Known(t) if t.is_address_like() => Ok(()),
            other => Err(type_err(e.span, format!("expected address, found {}", other.describe()))),
        }
    }

    fn expect_value(&self, e: &Expr) -> Result<(), Diagnostic> {
        let ty = self.expr_type(e)?;
        if assignable(&ty, &TypeExpr::UInt(256)) {
            Ok(())
        } else {
            Err(type_err(e.span, format!("value must be unsigned, found {}", ty.describe())))
        }
    }

    pub fn expr_type(&self, e: &Expr) -> Result<Ty, Diagnostic> {
        match &e.kind {
            ExprKind::Literal(Literal::Int(v)) => Ok(Ty::Literal(v.clone())),
            ExprKind::Literal(Literal::Bool(_)) => Ok(Ty::Known(TypeExpr::Bool)),
            ExprKind::Literal(Literal::Address(_)) => Ok(Ty::Known(TypeExpr::Address)),
            ExprKind::MsgSender => Ok(Ty::Known(TypeExpr::Address)),
            ExprKind::MsgValue => Ok(Ty::Known(TypeExpr::UInt(256))),
            ExprKind::Ident(name) => self
                .var_type(name)
                .map(Ty::Known)
                .ok_or_else(|| Diagnostic::name_error(e.span, format!("undeclared identifier `{name}`"))),
            ExprKind::Index { base, key } => {
                let bt = self.expr_type(base)?;
                match bt {
                    Ty::Known(TypeExpr::Mapping(k, v)) => {
                        let kt = self.expr_type(key)?;
                        if !assignable(&kt, &k) {
                            return Err(type_err(key.span, format!("key of type {} does not match {k}", kt.describe())));
                        }
                        Ok(Ty::Known(*v))
                    }
                    other => Err(type_err(base.span, format!("cannot index {}", other.describe()))),
                }
            }
            ExprKind::Member { base, field } => {
                self.expect_address(base)?;
                if field == "balance" {
                    Ok(Ty::Known(TypeExpr::UInt(256)))
                } else {
                    Err(type_err(e.span, format!("unknown member `{field}`")))
                }
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let lt = self.expr_type(lhs)?;
                let rt = self.expr_type(rhs)?;
                binary_type(*op, &lt, &rt).map_err(|m| type_err(e.span, m))
            }
            ExprKind::Unary { op, operand } => {
                let t = self.expr_type(operand)?;
                match op {
                    UnOp::Not if t.is_bool() => Ok(t),
                    UnOp::Not => Err(type_err(e.span, format!("`!` needs bool, found {}", t.describe()))),
                    UnOp::Neg => match &t {
                        Ty::Literal(v) => Ok(Ty::Literal(-v)),
                        Ty::Known(k) if k.int_type().is_some_and(|i| i.signed) => Ok(t),
                        _ => Err(type_err(e.span, format!("unary `-` needs a signed integer, found {}", t.describe()))),
                    },
                    UnOp::PostInc | UnOp::PostDec => {
                        if operand.lvalue_root().is_none() {
                            return Err(type_err(e.span, "`++`/`--` need an lvalue"));
                        }
                        if t.int_type().is_none() {
                            return Err(type_err(e.span, format!("`++`/`--` need an integer, found {}", t.describe())));
                        }
                        Ok(t)
                    }
                }
            }
            ExprKind::Cast { target, operand } => {
                let t = self.expr_type(operand)?;
                let Some(target_int) = target.int_type() else {
                    return Err(type_err(e.span, format!("cannot cast to {target}")));
                };
                match t {
                    Ty::Literal(v) if target_int.contains(&v) => Ok(Ty::Known(target.clone())),
                    Ty::Literal(v) => Err(type_err(e.span, format!("literal {v} does not fit {target}"))),
                    Ty::Known(k) if k.is_integer() => Ok(Ty::Known(target.clone())),
                    other => Err(type_err(e.span, format!("cannot cast {} to {target}", other.describe()))),
                }
            }
            ExprKind::CallInternal { name, args } => {
                let sig = self
                    .contract_info()
                    .and_then(|c| c.functions.get(name))
                    .ok_or_else(|| Diagnostic::name_error(e.span, format!("undeclared function `{name}`")))?;
                self.check_args(e.span, &sig.params, args)?;
                Ok(sig.returns.clone().map(Ty::Known).unwrap_or(Ty::Void))
            }
            ExprKind::CallExternal { target, name, args, value } => {
                let tt = self.expr_type(target)?;
                let Ty::Known(TypeExpr::ContractRef(cname)) = &tt else {
                    return Err(type_err(target.span, format!("`.{name}(...)` needs a contract, found {}", tt.describe())));
                };
                let sig = self
                    .unit
                    .contracts
                    .get(cname)
                    .and_then(|c| c.functions.get(name))
                    .ok_or_else(|| Diagnostic::name_error(e.span, format!("contract `{cname}` has no function `{name}`")))?;
                if sig.visibility != Visibility::Public {
                    return Err(type_err(e.span, format!("`{cname}.{name}` is internal")));
                }
                if let Some(v) = value {
                    self.expect_value(v)?;
                }
                self.check_args(e.span, &sig.params, args)?;
                Ok(sig.returns.clone().map(Ty::Known).unwrap_or(Ty::Void))
            }
            ExprKind::LowLevelCall { target, value } => {
                self.expect_address(target)?;
                if let Some(v) = value {
                    self.expect_value(v)?;
                }
                Ok(Ty::Known(TypeExpr::Bool))
            }
            ExprKind::DelegateCall { target, args } => {
                self.expect_address(target)?;
                for a in args {
                    self.expr_type(a)?;
                }
                Ok(Ty::Known(TypeExpr::Bool))
            }
            ExprKind::Transfer { target, amount } => {
                self.expect_address(target)?;
                self.expect_value(amount)?;
                Ok(Ty::Void)
            }
            ExprKind::New { contract, args } => {
                let info = self
                    .unit
                    .contracts
                    .get(contract)
                    .ok_or_else(|| Diagnostic::name_error(e.span, format!("unknown contract `{contract}`")))?;
                self.check_args(e.span, &info.constructor_params, args)?;
                Ok(Ty::Known(TypeExpr::ContractRef(contract.clone())))
            }
        }
    }
}

/// Result type of a binary operator.
pub fn binary_type(op: BinOp, lt: &Ty, rt: &Ty) -> Result<Ty, String> {
    match op {
        BinOp::And | BinOp::Or => {
            if lt.is_bool() && rt.is_bool() {
                Ok(Ty::Known(TypeExpr::Bool))
            } else {
                Err(format!("`{}` needs bool operands", op.as_str()))
            }
        }
        BinOp::Eq | BinOp::Ne => match (lt, rt) {
            (Ty::Known(a), Ty::Known(b)) if a == b && !a.is_mapping() => Ok(Ty::Known(TypeExpr::Bool)),
            (Ty::Known(a), Ty::Known(b)) if a.is_address_like() && b.is_address_like() => Ok(Ty::Known(TypeExpr::Bool)),
            _ => common_int(lt, rt).map(|_| Ty::Known(TypeExpr::Bool)),
        },
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => common_int(lt, rt).map(|_| Ty::Known(TypeExpr::Bool)),
        BinOp::Pow => {
            if let Ty::Known(t) = rt {
                if !t.int_type().is_some_and(|i| !i.signed) {
                    return Err(format!("exponent must be unsigned, found {t}"));
                }
            }
            match (lt, rt) {
                (Ty::Literal(a), Ty::Literal(b)) => {
                    fold_arith(op, a, b).map(Ty::Literal).ok_or_else(|| "constant exponentiation out of range".to_string())
                }
                (Ty::Literal(_), Ty::Known(_)) => Ok(Ty::Known(TypeExpr::UInt(256))),
                (Ty::Known(t), _) if t.is_integer() && rt.is_integer() => Ok(lt.clone()),
                _ => Err("`**` needs integer operands".into()),
            }
        }
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => match (lt, rt) {
            (Ty::Literal(a), Ty::Literal(b)) => {
                fold_arith(op, a, b).map(Ty::Literal).ok_or_else(|| "constant division by zero".to_string())
            }
            _ => common_int(lt, rt).map(|t| Ty::Known(t.expect("typed operand").as_type())),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn known(t: TypeExpr) -> Ty {
        Ty::Known(t)
    }

    #[test]
    fn widening_and_literals() {
        let t = binary_type(BinOp::Add, &known(TypeExpr::UInt(8)), &known(TypeExpr::UInt(32))).unwrap();
        assert_eq!(t, known(TypeExpr::UInt(32)));
        let t = binary_type(BinOp::Mul, &known(TypeExpr::Int(16)), &Ty::Literal(BigInt::from(-3))).unwrap();
        assert_eq!(t, known(TypeExpr::Int(16)));
        assert!(binary_type(BinOp::Add, &known(TypeExpr::UInt(8)), &Ty::Literal(BigInt::from(300))).is_err());
        assert!(binary_type(BinOp::Add, &known(TypeExpr::UInt(8)), &known(TypeExpr::Int(8))).is_err());
    }

    #[test]
    fn constants_fold_exactly() {
        let t = binary_type(BinOp::Sub, &Ty::Literal(BigInt::from(3)), &Ty::Literal(BigInt::from(5))).unwrap();
        assert_eq!(t, Ty::Literal(BigInt::from(-2)));
        assert_eq!(trunc_div(&BigInt::from(-7), &BigInt::from(2)), BigInt::from(-3));
    }

    #[test]
    fn lossy_casts() {
        let u8t = IntType::new(false, 8);
        let u16t = IntType::new(false, 16);
        let i8t = IntType::new(true, 8);
        let i16t = IntType::new(true, 16);
        assert!(cast_is_lossy(u16t, u8t));
        assert!(!cast_is_lossy(u8t, u16t));
        assert!(cast_is_lossy(u8t, i8t));
        assert!(!cast_is_lossy(u8t, i16t));
        assert!(cast_is_lossy(i8t, u16t));
    }

    #[test]
    fn assignability() {
        assert!(assignable(&known(TypeExpr::UInt(8)), &TypeExpr::UInt(256)));
        assert!(!assignable(&known(TypeExpr::UInt(256)), &TypeExpr::UInt(8)));
        assert!(assignable(&Ty::Literal(BigInt::from(255)), &TypeExpr::UInt(8)));
        assert!(!assignable(&Ty::Literal(BigInt::from(-1)), &TypeExpr::UInt(8)));
        assert!(assignable(&known(TypeExpr::ContractRef("A".into())), &TypeExpr::Address));
    }
}
