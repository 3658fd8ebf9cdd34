//! Uniform `{kind, span, children, attrs}` view of the AST.
//!
//! This is both the JSON document schema and the shape in which the code
//! property graph stores its AST subgraph, so lowering and raising here are
//! the single source of truth for how typed nodes map to generic ones.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};
use num_traits::Num;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use super::ast::*;
use super::parser::parse_type_str;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AstNode {
    pub kind: String,
    pub span: Span,
    pub children: Vec<AstNode>,
    pub attrs: BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("schema error at {path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl AstNode {
    pub fn new(kind: &str, span: Span) -> Self {
        AstNode { kind: kind.to_string(), span, children: Vec::new(), attrs: BTreeMap::new() }
    }

    fn attr(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.attrs.insert(key.to_string(), value.into());
        self
    }

    fn child(mut self, node: AstNode) -> Self {
        self.children.push(node);
        self
    }

    fn flag(self, key: &str, on: bool) -> Self {
        if on {
            self.attr(key, true)
        } else {
            self
        }
    }
}

// ---- lowering ----

pub fn lower_unit(unit: &SourceUnit) -> AstNode {
    let mut n = AstNode::new("SourceUnit", Span::NONE)
        .attr("pragma", unit.pragma_text.clone())
        .attr("source_name", unit.source_name.clone());
    n.children = unit.contracts.iter().map(lower_contract).collect();
    n
}

pub fn lower_contract(c: &ContractDecl) -> AstNode {
    let mut n = AstNode::new("Contract", c.span).attr("name", c.name.clone()).attr("abstract", c.is_abstract);
    n.children.extend(c.state_vars.iter().map(lower_var));
    n.children.extend(c.all_functions().map(lower_function));
    n
}

pub fn lower_var(v: &VarDecl) -> AstNode {
    let storage = match v.storage {
        StorageClass::State => "state",
        StorageClass::Local => "local",
    };
    let mut n = AstNode::new("VarDecl", v.span)
        .attr("name", v.name.clone())
        .attr("storage", storage)
        .attr("type", v.ty.to_string())
        .flag("patch", v.patch);
    if let Some(init) = &v.init {
        n = n.child(lower_expr(init));
    }
    n
}

pub fn lower_function(f: &FunctionDecl) -> AstNode {
    let visibility = match f.visibility {
        Visibility::Public => "public",
        Visibility::Internal => "internal",
    };
    let mut n = AstNode::new("Function", f.span)
        .attr("name", f.name.clone())
        .attr("visibility", visibility)
        .attr("payable", f.is_payable)
        .attr("virtual", f.is_virtual)
        .attr("constructor", f.is_constructor);
    if let Some(r) = &f.returns {
        n = n.attr("returns", r.to_string());
    }
    n.children.extend(f.params.iter().map(lower_var));
    if let Some(b) = &f.body {
        n = n.child(lower_block(b));
    }
    n
}

pub fn lower_block(b: &Block) -> AstNode {
    let mut n = AstNode::new("Block", b.span);
    n.children = b.stmts.iter().map(lower_stmt).collect();
    n
}

pub fn lower_stmt(s: &Stmt) -> AstNode {
    let n = match &s.kind {
        StmtKind::Decl(v) => AstNode::new("DeclStmt", s.span).child(lower_var(v)),
        StmtKind::Assign { lhs, op, rhs } => {
            AstNode::new("Assign", s.span).attr("op", op.as_str()).child(lower_expr(lhs)).child(lower_expr(rhs))
        }
        StmtKind::Expr(e) => AstNode::new("ExprStmt", s.span).child(lower_expr(e)),
        StmtKind::If { cond, then_block, else_block } => {
            let mut n = AstNode::new("If", s.span).child(lower_expr(cond)).child(lower_block(then_block));
            if let Some(b) = else_block {
                n = n.child(lower_block(b));
            }
            n
        }
        StmtKind::While { cond, body } => AstNode::new("While", s.span).child(lower_expr(cond)).child(lower_block(body)),
        StmtKind::For { init, cond, step, body } => {
            let mut n = AstNode::new("For", s.span)
                .attr("has_init", init.is_some())
                .attr("has_cond", cond.is_some())
                .attr("has_step", step.is_some());
            if let Some(i) = init {
                n = n.child(lower_stmt(i));
            }
            if let Some(c) = cond {
                n = n.child(lower_expr(c));
            }
            if let Some(st) = step {
                n = n.child(lower_stmt(st));
            }
            n.child(lower_block(body))
        }
        StmtKind::Return(e) => {
            let n = AstNode::new("Return", s.span);
            match e {
                Some(e) => n.child(lower_expr(e)),
                None => n,
            }
        }
        StmtKind::Require { cond, msg } => {
            let mut n = AstNode::new("Require", s.span).child(lower_expr(cond));
            if let Some(m) = msg {
                n = n.attr("msg", m.clone());
            }
            n
        }
        StmtKind::Assert(cond) => AstNode::new("Assert", s.span).child(lower_expr(cond)),
    };
    n.flag("patch", s.patch)
}

fn literal_attrs(n: AstNode, lit: &Literal) -> AstNode {
    match lit {
        Literal::Int(v) => n.attr("type", "int").attr("value", v.to_string()),
        Literal::Bool(b) => n.attr("type", "bool").attr("value", b.to_string()),
        Literal::Address(a) => n.attr("type", "address").attr("value", format!("0x{:040x}", a)),
    }
}

pub fn lower_expr(e: &Expr) -> AstNode {
    let n = AstNode::new(expr_kind_name(&e.kind), e.span);
    match &e.kind {
        ExprKind::Literal(lit) => literal_attrs(n, lit),
        ExprKind::Ident(name) => n.attr("name", name.clone()),
        ExprKind::Index { base, key } => n.child(lower_expr(base)).child(lower_expr(key)),
        ExprKind::Member { base, field } => n.attr("field", field.clone()).child(lower_expr(base)),
        ExprKind::Binary { op, lhs, rhs } => n.attr("op", op.as_str()).child(lower_expr(lhs)).child(lower_expr(rhs)),
        ExprKind::Unary { op, operand } => n.attr("op", op.tag()).child(lower_expr(operand)),
        ExprKind::Cast { target, operand } => n.attr("type", target.to_string()).child(lower_expr(operand)),
        ExprKind::CallInternal { name, args } => {
            let mut n = n.attr("name", name.clone());
            n.children = args.iter().map(lower_expr).collect();
            n
        }
        ExprKind::CallExternal { target, name, args, value } => {
            let mut n = n.attr("name", name.clone()).attr("value", value.is_some()).child(lower_expr(target));
            if let Some(v) = value {
                n = n.child(lower_expr(v));
            }
            n.children.extend(args.iter().map(lower_expr));
            n
        }
        ExprKind::LowLevelCall { target, value } => {
            let n = n.attr("value", value.is_some()).child(lower_expr(target));
            match value {
                Some(v) => n.child(lower_expr(v)),
                None => n,
            }
        }
        ExprKind::DelegateCall { target, args } => {
            let mut n = n.child(lower_expr(target));
            n.children.extend(args.iter().map(lower_expr));
            n
        }
        ExprKind::Transfer { target, amount } => n.child(lower_expr(target)).child(lower_expr(amount)),
        ExprKind::New { contract, args } => {
            let mut n = n.attr("contract", contract.clone());
            n.children = args.iter().map(lower_expr).collect();
            n
        }
        ExprKind::MsgSender | ExprKind::MsgValue => n,
    }
}

pub fn expr_kind_name(kind: &ExprKind) -> &'static str {
    match kind {
        ExprKind::Literal(_) => "Literal",
        ExprKind::Ident(_) => "Ident",
        ExprKind::Index { .. } => "Index",
        ExprKind::Member { .. } => "Member",
        ExprKind::Binary { .. } => "Binary",
        ExprKind::Unary { .. } => "Unary",
        ExprKind::Cast { .. } => "Cast",
        ExprKind::CallInternal { .. } => "CallInternal",
        ExprKind::CallExternal { .. } => "CallExternal",
        ExprKind::LowLevelCall { .. } => "LowLevelCall",
        ExprKind::DelegateCall { .. } => "DelegateCall",
        ExprKind::Transfer { .. } => "Transfer",
        ExprKind::New { .. } => "New",
        ExprKind::MsgSender => "MsgSender",
        ExprKind::MsgValue => "MsgValue",
    }
}

pub const STMT_KINDS: [&str; 9] = ["DeclStmt", "Assign", "ExprStmt", "If", "While", "For", "Return", "Require", "Assert"];

pub const EXPR_KINDS: [&str; 15] = [
    "Literal",
    "Ident",
    "Index",
    "Member",
    "Binary",
    "Unary",
    "Cast",
    "CallInternal",
    "CallExternal",
    "LowLevelCall",
    "DelegateCall",
    "Transfer",
    "New",
    "MsgSender",
    "MsgValue",
];

// ---- raising ----

struct Reader<'a> {
    node: &'a AstNode,
    path: String,
}

impl<'a> Reader<'a> {
    fn new(node: &'a AstNode, path: String) -> Self {
        Reader { node, path }
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, SchemaError> {
        Err(SchemaError { path: self.path.clone(), message: message.into() })
    }

    fn expect_kind(&self, kind: &str) -> Result<(), SchemaError> {
        if self.node.kind == kind {
            Ok(())
        } else {
            self.err(format!("expected {kind}, found {}", self.node.kind))
        }
    }

    fn str_attr(&self, key: &str) -> Result<String, SchemaError> {
        match self.node.attrs.get(key) {
            Some(Value::String(s)) => Ok(s.clone()),
            Some(_) => self.err(format!("attribute `{key}` must be a string")),
            None => self.err(format!("missing attribute `{key}`")),
        }
    }

    fn opt_str_attr(&self, key: &str) -> Result<Option<String>, SchemaError> {
        match self.node.attrs.get(key) {
            None => Ok(None),
            Some(_) => self.str_attr(key).map(Some),
        }
    }

    fn bool_attr(&self, key: &str) -> Result<bool, SchemaError> {
        match self.node.attrs.get(key) {
            Some(Value::Bool(b)) => Ok(*b),
            Some(_) => self.err(format!("attribute `{key}` must be a boolean")),
            None => self.err(format!("missing attribute `{key}`")),
        }
    }

    fn flag(&self, key: &str) -> Result<bool, SchemaError> {
        match self.node.attrs.get(key) {
            None => Ok(false),
            Some(_) => self.bool_attr(key),
        }
    }

    fn type_attr(&self, key: &str) -> Result<TypeExpr, SchemaError> {
        let text = self.str_attr(key)?;
        parse_type_str(&text).map_or_else(|| self.err(format!("malformed type `{text}`")), Ok)
    }

    fn child(&self, i: usize) -> Result<Reader<'a>, SchemaError> {
        match self.node.children.get(i) {
            Some(c) => Ok(Reader::new(c, format!("{}.children[{i}]", self.path))),
            None => self.err(format!("missing child {i}")),
        }
    }

    fn children(&self) -> impl Iterator<Item = Reader<'a>> + '_ {
        self.node.children.iter().enumerate().map(move |(i, c)| Reader::new(c, format!("{}.children[{i}]", self.path)))
    }

    fn arity(&self, n: usize) -> Result<(), SchemaError> {
        if self.node.children.len() == n {
            Ok(())
        } else {
            self.err(format!("expected {n} children, found {}", self.node.children.len()))
        }
    }
}

pub fn raise_unit(node: &AstNode) -> Result<SourceUnit, SchemaError> {
    let r = Reader::new(node, "$".into());
    r.expect_kind("SourceUnit")?;
    Ok(SourceUnit {
        source_name: r.str_attr("source_name")?,
        pragma_text: r.str_attr("pragma")?,
        contracts: r.children().map(|c| contract(&c)).collect::<Result<_, _>>()?,
    })
}

fn contract(r: &Reader) -> Result<ContractDecl, SchemaError> {
    r.expect_kind("Contract")?;
    let mut c = ContractDecl {
        name: r.str_attr("name")?,
        is_abstract: r.bool_attr("abstract")?,
        state_vars: Vec::new(),
        constructor: None,
        functions: Vec::new(),
        span: r.node.span,
    };
    for child in r.children() {
        match child.node.kind.as_str() {
            "VarDecl" => c.state_vars.push(var(&child)?),
            "Function" => {
                let f = function(&child)?;
                if f.is_constructor {
                    if c.constructor.is_some() {
                        return child.err("second constructor");
                    }
                    c.constructor = Some(f);
                } else {
                    c.functions.push(f);
                }
            }
            other => return child.err(format!("unexpected {other} in contract")),
        }
    }
    Ok(c)
}

fn var(r: &Reader) -> Result<VarDecl, SchemaError> {
    r.expect_kind("VarDecl")?;
    let storage = match r.str_attr("storage")?.as_str() {
        "state" => StorageClass::State,
        "local" => StorageClass::Local,
        other => return r.err(format!("unknown storage class `{other}`")),
    };
    let init = match r.node.children.len() {
        0 => None,
        1 => Some(expr(&r.child(0)?)?),
        _ => return r.err("variable has more than one initializer"),
    };
    Ok(VarDecl { name: r.str_attr("name")?, ty: r.type_attr("type")?, storage, init, span: r.node.span, patch: r.flag("patch")? })
}

fn function(r: &Reader) -> Result<FunctionDecl, SchemaError> {
    r.expect_kind("Function")?;
    let visibility = match r.str_attr("visibility")?.as_str() {
        "public" => Visibility::Public,
        "internal" => Visibility::Internal,
        other => return r.err(format!("unknown visibility `{other}`")),
    };
    let mut params = Vec::new();
    let mut body = None;
    for child in r.children() {
        match child.node.kind.as_str() {
            "VarDecl" if body.is_none() => params.push(var(&child)?),
            "Block" if body.is_none() => body = Some(block(&child)?),
            other => return child.err(format!("unexpected {other} in function")),
        }
    }
    let returns = match r.opt_str_attr("returns")? {
        Some(_) => Some(r.type_attr("returns")?),
        None => None,
    };
    Ok(FunctionDecl {
        name: r.str_attr("name")?,
        visibility,
        is_payable: r.bool_attr("payable")?,
        is_virtual: r.bool_attr("virtual")?,
        is_constructor: r.bool_attr("constructor")?,
        params,
        returns,
        body,
        span: r.node.span,
    })
}

fn block(r: &Reader) -> Result<Block, SchemaError> {
    r.expect_kind("Block")?;
    Ok(Block { stmts: r.children().map(|c| stmt(&c)).collect::<Result<_, _>>()?, span: r.node.span })
}

pub fn raise_block(node: &AstNode) -> Result<Block, SchemaError> {
    block(&Reader::new(node, "$".into()))
}

pub fn raise_stmt(node: &AstNode) -> Result<Stmt, SchemaError> {
    stmt(&Reader::new(node, "$".into()))
}

pub fn raise_expr(node: &AstNode) -> Result<Expr, SchemaError> {
    expr(&Reader::new(node, "$".into()))
}

pub fn raise_function(node: &AstNode) -> Result<FunctionDecl, SchemaError> {
    function(&Reader::new(node, "$".into()))
}

pub fn raise_var(node: &AstNode) -> Result<VarDecl, SchemaError> {
    var(&Reader::new(node, "$".into()))
}

fn stmt(r: &Reader) -> Result<Stmt, SchemaError> {
    let kind = match r.node.kind.as_str() {
        "DeclStmt" => {
            r.arity(1)?;
            StmtKind::Decl(var(&r.child(0)?)?)
        }
        "Assign" => {
            r.arity(2)?;
            let op_text = r.str_attr("op")?;
            let Some(op) = AssignOp::from_symbol(&op_text) else {
                return r.err(format!("unknown assignment operator `{op_text}`"));
            };
            StmtKind::Assign { lhs: expr(&r.child(0)?)?, op, rhs: expr(&r.child(1)?)? }
        }
        "ExprStmt" => {
            r.arity(1)?;
            StmtKind::Expr(expr(&r.child(0)?)?)
        }
        "If" => {
            let n = r.node.children.len();
            if !(2..=3).contains(&n) {
                return r.err("if needs 2 or 3 children");
            }
            StmtKind::If {
                cond: expr(&r.child(0)?)?,
                then_block: block(&r.child(1)?)?,
                else_block: if n == 3 { Some(block(&r.child(2)?)?) } else { None },
            }
        }
        "While" => {
            r.arity(2)?;
            StmtKind::While { cond: expr(&r.child(0)?)?, body: block(&r.child(1)?)? }
        }
        "For" => {
            let (hi, hc, hs) = (r.bool_attr("has_init")?, r.bool_attr("has_cond")?, r.bool_attr("has_step")?);
            r.arity(1 + hi as usize + hc as usize + hs as usize)?;
            let mut i = 0;
            let mut next = || {
                i += 1;
                i - 1
            };
            let init = if hi { Some(Box::new(stmt(&r.child(next())?)?)) } else { None };
            let cond = if hc { Some(expr(&r.child(next())?)?) } else { None };
            let step = if hs { Some(Box::new(stmt(&r.child(next())?)?)) } else { None };
            let body = block(&r.child(next())?)?;
            StmtKind::For { init, cond, step, body }
        }
        "Return" => match r.node.children.len() {
            0 => StmtKind::Return(None),
            1 => StmtKind::Return(Some(expr(&r.child(0)?)?)),
            _ => return r.err("return takes at most one value"),
        },
        "Require" => {
            r.arity(1)?;
            StmtKind::Require { cond: expr(&r.child(0)?)?, msg: r.opt_str_attr("msg")? }
        }
        "Assert" => {
            r.arity(1)?;
            StmtKind::Assert(expr(&r.child(0)?)?)
        }
        other => return r.err(format!("unknown statement kind `{other}`")),
    };
    Ok(Stmt { kind, span: r.node.span, patch: r.flag("patch")? })
}

fn exprs(r: &Reader, from: usize) -> Result<Vec<Expr>, SchemaError> {
    r.children().skip(from).map(|c| expr(&c)).collect()
}

fn boxed(r: &Reader, i: usize) -> Result<Box<Expr>, SchemaError> {
    Ok(Box::new(expr(&r.child(i)?)?))
}

fn expr(r: &Reader) -> Result<Expr, SchemaError> {
    let kind = match r.node.kind.as_str() {
        "Literal" => {
            r.arity(0)?;
            let value = r.str_attr("value")?;
            let lit = match r.str_attr("type")?.as_str() {
                "int" => match value.parse::<BigInt>() {
                    Ok(v) => Literal::Int(v),
                    Err(_) => return r.err(format!("malformed integer `{value}`")),
                },
                "bool" => match value.as_str() {
                    "true" => Literal::Bool(true),
                    "false" => Literal::Bool(false),
                    _ => return r.err(format!("malformed bool `{value}`")),
                },
                "address" => match value.strip_prefix("0x").and_then(|h| BigUint::from_str_radix(h, 16).ok()) {
                    Some(a) => Literal::Address(a),
                    None => return r.err(format!("malformed address `{value}`")),
                },
                other => return r.err(format!("unknown literal type `{other}`")),
            };
            ExprKind::Literal(lit)
        }
        "Ident" => {
            r.arity(0)?;
            ExprKind::Ident(r.str_attr("name")?)
        }
        "Index" => {
            r.arity(2)?;
            ExprKind::Index { base: boxed(r, 0)?, key: boxed(r, 1)? }
        }
        "Member" => {
            r.arity(1)?;
            ExprKind::Member { base: boxed(r, 0)?, field: r.str_attr("field")? }
        }
        "Binary" => {
            r.arity(2)?;
            let text = r.str_attr("op")?;
            let Some(op) = BinOp::from_symbol(&text) else {
                return r.err(format!("unknown binary operator `{text}`"));
            };
            ExprKind::Binary { op, lhs: boxed(r, 0)?, rhs: boxed(r, 1)? }
        }
        "Unary" => {
            r.arity(1)?;
            let text = r.str_attr("op")?;
            let Some(op) = UnOp::from_tag(&text) else {
                return r.err(format!("unknown unary operator `{text}`"));
            };
            ExprKind::Unary { op, operand: boxed(r, 0)? }
        }
        "Cast" => {
            r.arity(1)?;
            ExprKind::Cast { target: r.type_attr("type")?, operand: boxed(r, 0)? }
        }
        "CallInternal" => ExprKind::CallInternal { name: r.str_attr("name")?, args: exprs(r, 0)? },
        "CallExternal" => {
            let has_value = r.bool_attr("value")?;
            let target = boxed(r, 0)?;
            let value = if has_value { Some(boxed(r, 1)?) } else { None };
            ExprKind::CallExternal { target, name: r.str_attr("name")?, args: exprs(r, 1 + has_value as usize)?, value }
        }
        "LowLevelCall" => {
            let has_value = r.bool_attr("value")?;
            r.arity(1 + has_value as usize)?;
            ExprKind::LowLevelCall { target: boxed(r, 0)?, value: if has_value { Some(boxed(r, 1)?) } else { None } }
        }
        "DelegateCall" => ExprKind::DelegateCall { target: boxed(r, 0)?, args: exprs(r, 1)? },
        "Transfer" => {
            r.arity(2)?;
            ExprKind::Transfer { target: boxed(r, 0)?, amount: boxed(r, 1)? }
        }
        "New" => ExprKind::New { contract: r.str_attr("contract")?, args: exprs(r, 0)? },
        "MsgSender" => {
            r.arity(0)?;
            ExprKind::MsgSender
        }
        "MsgValue" => {
            r.arity(0)?;
            ExprKind::MsgValue
        }
        other => return r.err(format!("unknown expression kind `{other}`")),
    };
    Ok(Expr { kind, span: r.node.span })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;

    #[test]
    fn lower_raise_round_trip() {
        let src = r#"pragma solidity ^0.4.15;
contract A {
  mapping(address => uint8) m;
  A other;
  constructor(uint8 x) public { m[msg.sender] = x; }
  function f(uint8 a) public payable returns (uint8) {
    for (uint8 i = 0; i < a; i++) { m[msg.sender] += 1; }
    if (a > 1) { return a - 1; } else { other.f(a); }
    msg.sender.call.value(msg.value)("");
    require(a != 0, "zero");
    return uint8(int16(-3) + 3);
  }
}"#;
        let unit = parse(src, "a.msol").unwrap();
        let back = raise_unit(&lower_unit(&unit)).unwrap();
        assert_eq!(back, unit);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let mut n = lower_unit(&parse("contract C { uint x; }", "c").unwrap());
        n.children[0].children[0].attrs.remove("type");
        let err = raise_unit(&n).unwrap_err();
        assert_eq!(err.path, "$.children[0].children[0]");
    }
}
