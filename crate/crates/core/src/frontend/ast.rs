//! Typed syntax tree for MiniSol.
//!
//! Every statement and expression carries a [`Span`]. Structural comparisons
//! (round-trip tests, golden tests) go through [`SourceUnit::without_spans`],
//! which zeroes every span so that only shape and content are compared.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use serde::{Deserialize, Serialize};

/// Source position: 1-based line and byte column plus byte length.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
    pub len: u32,
}

impl Span {
    pub const NONE: Span = Span { line: 0, col: 0, len: 0 };

    pub fn new(line: u32, col: u32, len: u32) -> Self {
        Span { line, col, len }
    }

    /// Byte range of this span inside `source`, if it lies within it.
    pub fn byte_range(&self, source: &str) -> Option<std::ops::Range<usize>> {
        if self.line == 0 {
            return None;
        }
        let mut offset = 0usize;
        for (idx, line) in source.split_inclusive('\n').enumerate() {
            if idx + 1 == self.line as usize {
                let start = offset + self.col as usize - 1;
                let end = start + self.len as usize;
                return (end <= source.len()).then_some(start..end);
            }
            offset += line.len();
        }
        None
    }
}

/// Integer type with explicit signedness and bit width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IntType {
    pub signed: bool,
    pub bits: u16,
}

impl IntType {
    pub const UINT256: IntType = IntType { signed: false, bits: 256 };

    pub fn new(signed: bool, bits: u16) -> Self {
        IntType { signed, bits }
    }

    pub fn min_value(&self) -> BigInt {
        if self.signed {
            -(BigInt::from(1) << (self.bits as usize - 1))
        } else {
            BigInt::from(0)
        }
    }

    pub fn max_value(&self) -> BigInt {
        if self.signed {
            (BigInt::from(1) << (self.bits as usize - 1)) - 1
        } else {
            (BigInt::from(1) << self.bits as usize) - 1
        }
    }

    pub fn contains(&self, value: &BigInt) -> bool {
        *value >= self.min_value() && *value <= self.max_value()
    }

    /// Reduce `value` modulo 2^bits, two's complement for signed types.
    pub fn wrap(&self, value: &BigInt) -> BigInt {
        let modulus = BigInt::from(1) << self.bits as usize;
        let mut v = value % &modulus;
        if v < BigInt::from(0) {
            v += &modulus;
        }
        if self.signed && v > self.max_value() {
            v -= modulus;
        }
        v
    }

    pub fn as_type(&self) -> TypeExpr {
        if self.signed {
            TypeExpr::Int(self.bits)
        } else {
            TypeExpr::UInt(self.bits)
        }
    }
}

impl fmt::Display for IntType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", if self.signed { "int" } else { "uint" }, self.bits)
    }
}

pub const INT_WIDTHS: [u16; 6] = [8, 16, 32, 64, 128, 256];

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeExpr {
    UInt(u16),
    Int(u16),
    Bool,
    Address,
    Mapping(Box<TypeExpr>, Box<TypeExpr>),
    ContractRef(String),
}

impl TypeExpr {
    pub fn int_type(&self) -> Option<IntType> {
        match self {
            TypeExpr::UInt(bits) => Some(IntType::new(false, *bits)),
            TypeExpr::Int(bits) => Some(IntType::new(true, *bits)),
            _ => None,
        }
    }

    pub fn is_integer(&self) -> bool {
        self.int_type().is_some()
    }

    pub fn is_mapping(&self) -> bool {
        matches!(self, TypeExpr::Mapping(..))
    }

    /// Addresses and contract references share the address value domain.
    pub fn is_address_like(&self) -> bool {
        matches!(self, TypeExpr::Address | TypeExpr::ContractRef(_))
    }
}

impl fmt::Display for TypeExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeExpr::UInt(bits) => write!(f, "uint{bits}"),
            TypeExpr::Int(bits) => write!(f, "int{bits}"),
            TypeExpr::Bool => f.write_str("bool"),
            TypeExpr::Address => f.write_str("address"),
            TypeExpr::Mapping(k, v) => write!(f, "mapping({k} => {v})"),
            TypeExpr::ContractRef(name) => f.write_str(name),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StorageClass {
    State,
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Visibility {
    Public,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub source_name: String,
    /// Verbatim pragma line including the trailing `;`, or empty.
    pub pragma_text: String,
    pub contracts: Vec<ContractDecl>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractDecl {
    pub name: String,
    pub is_abstract: bool,
    pub state_vars: Vec<VarDecl>,
    pub constructor: Option<FunctionDecl>,
    pub functions: Vec<FunctionDecl>,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub ty: TypeExpr,
    pub storage: StorageClass,
    pub init: Option<Expr>,
    pub span: Span,
    pub patch: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub visibility: Visibility,
    pub is_payable: bool,
    pub is_virtual: bool,
    pub is_constructor: bool,
    pub params: Vec<VarDecl>,
    pub returns: Option<TypeExpr>,
    /// `None` only for bodyless declarations in abstract contracts.
    pub body: Option<Block>,
    pub span: Span,
}

impl FunctionDecl {
    /// Named `fallback`/`receive`: the entry point for plain value calls and delegatecalls.
    pub fn is_fallback(&self) -> bool {
        !self.is_constructor && (self.name == "fallback" || self.name == "receive")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Block {
    pub stmts: Vec<Stmt>,
    pub span: Span,
}

impl Block {
    pub fn new(stmts: Vec<Stmt>) -> Self {
        Block { stmts, span: Span::NONE }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Assign,
    AddAssign,
    SubAssign,
}

impl AssignOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            AssignOp::Assign => "=",
            AssignOp::AddAssign => "+=",
            AssignOp::SubAssign => "-=",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        Some(match s {
            "=" => AssignOp::Assign,
            "+=" => AssignOp::AddAssign,
            "-=" => AssignOp::SubAssign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub kind: StmtKind,
    pub span: Span,
    pub patch: bool,
}

impl Stmt {
    pub fn new(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::NONE, patch: false }
    }

    pub fn patched(kind: StmtKind) -> Self {
        Stmt { kind, span: Span::NONE, patch: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StmtKind {
    Decl(VarDecl),
    Assign { lhs: Expr, op: AssignOp, rhs: Expr },
    Expr(Expr),
    If { cond: Expr, then_block: Block, else_block: Option<Block> },
    While { cond: Expr, body: Block },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Box<Stmt>>, body: Block },
    Return(Option<Expr>),
    Require { cond: Expr, msg: Option<String> },
    Assert(Expr),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ALL: [BinOp; 13] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::Div,
        BinOp::Pow,
        BinOp::Lt,
        BinOp::Le,
        BinOp::Gt,
        BinOp::Ge,
        BinOp::Eq,
        BinOp::Ne,
        BinOp::And,
        BinOp::Or,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "**",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<Self> {
        BinOp::ALL.into_iter().find(|op| op.as_str() == s)
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(&self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div => 6,
            BinOp::Pow => 8,
        }
    }

    pub fn is_arithmetic(&self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Pow)
    }

    pub fn is_comparison(&self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnOp {
    Not,
    Neg,
    PostInc,
    PostDec,
}

impl UnOp {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
            UnOp::PostInc => "++",
            UnOp::PostDec => "--",
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            UnOp::Not => "!",
            UnOp::Neg => "-",
            UnOp::PostInc => "++post",
            UnOp::PostDec => "--post",
        }
    }

    pub fn from_tag(s: &str) -> Option<Self> {
        Some(match s {
            "!" => UnOp::Not,
            "-" => UnOp::Neg,
            "++post" => UnOp::PostInc,
            "--post" => UnOp::PostDec,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(BigInt),
    Bool(bool),
    Address(BigUint),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(Literal),
    Ident(String),
    Index { base: Box<Expr>, key: Box<Expr> },
    Member { base: Box<Expr>, field: String },
    Binary { op: BinOp, lhs: Box<Expr>, rhs: Box<Expr> },
    Unary { op: UnOp, operand: Box<Expr> },
    Cast { target: TypeExpr, operand: Box<Expr> },
    CallInternal { name: String, args: Vec<Expr> },
    CallExternal { target: Box<Expr>, name: String, args: Vec<Expr>, value: Option<Box<Expr>> },
    LowLevelCall { target: Box<Expr>, value: Option<Box<Expr>> },
    DelegateCall { target: Box<Expr>, args: Vec<Expr> },
    Transfer { target: Box<Expr>, amount: Box<Expr> },
    New { contract: String, args: Vec<Expr> },
    MsgSender,
    MsgValue,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, span: Span::NONE }
    }

    pub fn ident(name: impl Into<String>) -> Self {
        Expr::new(ExprKind::Ident(name.into()))
    }

    pub fn int(value: impl Into<BigInt>) -> Self {
        Expr::new(ExprKind::Literal(Literal::Int(value.into())))
    }

    pub fn bool(value: bool) -> Self {
        Expr::new(ExprKind::Literal(Literal::Bool(value)))
    }

    pub fn binary(op: BinOp, lhs: Expr, rhs: Expr) -> Self {
        Expr::new(ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) })
    }

    pub fn unary(op: UnOp, operand: Expr) -> Self {
        Expr::new(ExprKind::Unary { op, operand: Box::new(operand) })
    }

    pub fn index(base: Expr, key: Expr) -> Self {
        Expr::new(ExprKind::Index { base: Box::new(base), key: Box::new(key) })
    }

    pub fn cast(target: TypeExpr, operand: Expr) -> Self {
        Expr::new(ExprKind::Cast { target, operand: Box::new(operand) })
    }

    /// Direct sub-expressions in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Literal(_) | ExprKind::Ident(_) | ExprKind::MsgSender | ExprKind::MsgValue => vec![],
            ExprKind::Index { base, key } => vec![base, key],
            ExprKind::Member { base, .. } => vec![base],
            ExprKind::Binary { lhs, rhs, .. } => vec![lhs, rhs],
            ExprKind::Unary { operand, .. } => vec![operand],
            ExprKind::Cast { operand, .. } => vec![operand],
            ExprKind::CallInternal { args, .. } | ExprKind::New { args, .. } => args.iter().collect(),
            ExprKind::CallExternal { target, args, value, .. } => {
                let mut out: Vec<&Expr> = vec![target];
                out.extend(value.iter().map(|v| v.as_ref()));
                out.extend(args.iter());
                out
            }
            ExprKind::LowLevelCall { target, value } => {
                let mut out: Vec<&Expr> = vec![target];
                out.extend(value.iter().map(|v| v.as_ref()));
                out
            }
            ExprKind::DelegateCall { target, args } => {
                let mut out: Vec<&Expr> = vec![target];
                out.extend(args.iter());
                out
            }
            ExprKind::Transfer { target, amount } => vec![target, amount],
        }
    }

    /// Pre-order walk over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        for child in self.children() {
            child.walk(f);
        }
    }

    /// Root variable name of an lvalue-shaped expression (`a`, `a[k]`, `a[k][j]`).
    pub fn lvalue_root(&self) -> Option<&str> {
        match &self.kind {
            ExprKind::Ident(name) => Some(name),
            ExprKind::Index { base, .. } => base.lvalue_root(),
            _ => None,
        }
    }

    /// True when evaluating the expression can change state or call out.
    pub fn has_side_effects(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            if matches!(
                e.kind,
                ExprKind::CallInternal { .. }
                    | ExprKind::CallExternal { .. }
                    | ExprKind::LowLevelCall { .. }
                    | ExprKind::DelegateCall { .. }
                    | ExprKind::Transfer { .. }
                    | ExprKind::New { .. }
                    | ExprKind::Unary { op: UnOp::PostInc | UnOp::PostDec, .. }
            ) {
                found = true;
            }
        });
        found
    }
}

impl Stmt {
    /// Expressions owned directly by this statement (not by nested statements).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match &self.kind {
            StmtKind::Decl(var) => var.init.iter().collect(),
            StmtKind::Assign { lhs, rhs, .. } => vec![lhs, rhs],
            StmtKind::Expr(e) | StmtKind::Assert(e) => vec![e],
            StmtKind::If { cond, .. } | StmtKind::While { cond, .. } => vec![cond],
            StmtKind::For { cond, .. } => cond.iter().collect(),
            StmtKind::Return(e) => e.iter().collect(),
            StmtKind::Require { cond, .. } => vec![cond],
        }
    }
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.contracts.iter().find(|c| c.name == name)
    }

    /// Copy with every span reset; used for structural equality.
    pub fn without_spans(&self) -> SourceUnit {
        let mut unit = self.clone();
        strip::unit(&mut unit, false);
        unit
    }

    /// Copy with spans reset and patch flags cleared.
    pub fn normalized(&self) -> SourceUnit {
        let mut unit = self.clone();
        strip::unit(&mut unit, true);
        unit
    }

    /// Structural equality: ignores spans, keeps patch flags.
    pub fn structurally_eq(&self, other: &SourceUnit) -> bool {
        self.without_spans() == other.without_spans()
    }
}

impl ContractDecl {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&VarDecl> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    /// Constructor first, then functions in declaration order.
    pub fn all_functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.constructor.iter().chain(self.functions.iter())
    }
}

pub(crate) mod strip {
    use super::*;

    pub fn unit(unit: &mut SourceUnit, clear_patch: bool) {
        for c in &mut unit.contracts {
            c.span = Span::NONE;
            for v in &mut c.state_vars {
                var(v, clear_patch);
            }
            for f in c.constructor.iter_mut().chain(c.functions.iter_mut()) {
                f.span = Span::NONE;
                for p in &mut f.params {
                    var(p, clear_patch);
                }
                if let Some(b) = &mut f.body {
                    block(b, clear_patch);
                }
            }
        }
    }

    fn var(v: &mut VarDecl, clear_patch: bool) {
        v.span = Span::NONE;
        if clear_patch {
            v.patch = false;
        }
        if let Some(e) = &mut v.init {
            expr(e);
        }
    }

    fn block(b: &mut Block, clear_patch: bool) {
        b.span = Span::NONE;
        for s in &mut b.stmts {
            stmt(s, clear_patch);
        }
    }

    pub fn stmt(s: &mut Stmt, clear_patch: bool) {
        s.span = Span::NONE;
        if clear_patch {
            s.patch = false;
        }
        match &mut s.kind {
            StmtKind::Decl(v) => var(v, clear_patch),
            StmtKind::Assign { lhs, rhs, .. } => {
                expr(lhs);
                expr(rhs);
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) => expr(e),
            StmtKind::If { cond, then_block, else_block } => {
                expr(cond);
                block(then_block, clear_patch);
                if let Some(b) = else_block {
                    block(b, clear_patch);
                }
            }
            StmtKind::While { cond, body } => {
                expr(cond);
                block(body, clear_patch);
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(s) = init {
                    stmt(s, clear_patch);
                }
                if let Some(c) = cond {
                    expr(c);
                }
                if let Some(s) = step {
                    stmt(s, clear_patch);
                }
                block(body, clear_patch);
            }
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    expr(e);
                }
            }
            StmtKind::Require { cond, .. } => expr(cond),
        }
    }

    pub fn expr(e: &mut Expr) {
        e.span = Span::NONE;
        match &mut e.kind {
            ExprKind::Literal(_) | ExprKind::Ident(_) | ExprKind::MsgSender | ExprKind::MsgValue => {}
            ExprKind::Index { base, key } => {
                expr(base);
                expr(key);
            }
            ExprKind::Member { base, .. } => expr(base),
            ExprKind::Binary { lhs, rhs, .. } => {
                expr(lhs);
                expr(rhs);
            }
            ExprKind::Unary { operand, .. } | ExprKind::Cast { operand, .. } => expr(operand),
            ExprKind::CallInternal { args, .. } | ExprKind::New { args, .. } => args.iter_mut().for_each(expr),
            ExprKind::CallExternal { target, args, value, .. } => {
                expr(target);
                if let Some(v) = value {
                    expr(v);
                }
                args.iter_mut().for_each(expr);
            }
            ExprKind::LowLevelCall { target, value } => {
                expr(target);
                if let Some(v) = value {
                    expr(v);
                }
            }
            ExprKind::DelegateCall { target, args } => {
                expr(target);
                args.iter_mut().for_each(expr);
            }
            ExprKind::Transfer { target, amount } => {
                expr(target);
                expr(amount);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_unsigned_and_signed() {
        let u8t = IntType::new(false, 8);
        assert_eq!(u8t.wrap(&BigInt::from(300)), BigInt::from(44));
        assert_eq!(u8t.wrap(&BigInt::from(-1)), BigInt::from(255));
        let i8t = IntType::new(true, 8);
        assert_eq!(i8t.wrap(&BigInt::from(-200)), BigInt::from(56));
        assert_eq!(i8t.wrap(&BigInt::from(128)), BigInt::from(-128));
        assert_eq!(i8t.wrap(&BigInt::from(-128)), BigInt::from(-128));
    }

    #[test]
    fn ranges() {
        let i16t = IntType::new(true, 16);
        assert_eq!(i16t.min_value(), BigInt::from(-32768));
        assert_eq!(i16t.max_value(), BigInt::from(32767));
        assert!(!IntType::new(false, 8).contains(&BigInt::from(256)));
    }

    #[test]
    fn span_byte_range() {
        let src = "ab\ncdef\n";
        let span = Span::new(2, 2, 3);
        assert_eq!(&src[span.byte_range(src).unwrap()], "def");
    }
}
