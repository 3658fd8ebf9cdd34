//! Recursive-descent parser for MiniSol.
//!
//! The parser only checks syntax; names and types are checked by `sema`.
//! Errors are collected with resynchronisation at `;` and `}` boundaries.

use num_bigint::BigUint;
use num_traits::Num;

use super::ast::*;
use super::lexer::{tokenize, TokKind, Token};
use super::{Diagnostic, ParseError, MAX_DIAGNOSTICS};

/// Identifiers with this prefix are reserved for synthesized hardening code.
pub const RESERVED_PREFIX: &str = "_hcc_";

const KEYWORDS: [&str; 20] = [
    "contract",
    "abstract",
    "function",
    "constructor",
    "returns",
    "return",
    "if",
    "else",
    "while",
    "for",
    "require",
    "assert",
    "mapping",
    "new",
    "msg",
    "true",
    "false",
    "public",
    "internal",
    "payable",
];

/// Marker error: the diagnostic has already been recorded.
struct Bail;

type PResult<T> = Result<T, Bail>;

pub(crate) fn elementary_type(word: &str) -> Option<TypeExpr> {
    let int = |rest: &str| -> Option<u16> {
        if rest.is_empty() {
            return Some(256);
        }
        let bits: u16 = rest.parse().ok()?;
        INT_WIDTHS.contains(&bits).then_some(bits)
    };
    match word {
        "bool" => Some(TypeExpr::Bool),
        "address" => Some(TypeExpr::Address),
        _ => {
            if let Some(rest) = word.strip_prefix("uint") {
                int(rest).map(TypeExpr::UInt)
            } else if let Some(rest) = word.strip_prefix("int") {
                int(rest).map(TypeExpr::Int)
            } else {
                None
            }
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    idx: usize,
    errors: Vec<Diagnostic>,
}

impl Parser {
    fn new(src: &str) -> Self {
        let (toks, errors) = tokenize(src);
        Parser { toks, idx: 0, errors }
    }

    fn peek(&self) -> &TokKind {
        &self.toks[self.idx].kind
    }

    fn peek_at(&self, ahead: usize) -> &TokKind {
        let i = (self.idx + ahead).min(self.toks.len() - 1);
        &self.toks[i].kind
    }

    fn tok(&self) -> &Token {
        &self.toks[self.idx]
    }

    fn prev(&self) -> &Token {
        &self.toks[self.idx.saturating_sub(1)]
    }

    fn advance(&mut self) -> Token {
        let t = self.toks[self.idx].clone();
        if self.idx + 1 < self.toks.len() {
            self.idx += 1;
        }
        t
    }

    fn at_eof(&self) -> bool {
        matches!(self.peek(), TokKind::Eof)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), TokKind::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), TokKind::Ident(x) if x == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.advance();
            true
        } else {
            false
        }
    }

    fn error(&mut self, span: Span, msg: impl Into<String>) -> Bail {
        if self.errors.len() < MAX_DIAGNOSTICS {
            self.errors.push(Diagnostic::syntax(span, msg));
        }
        Bail
    }

    fn unexpected(&mut self, expected: &str) -> Bail {
        let t = self.tok().clone();
        let found = match &t.kind {
            TokKind::Eof => "end of input".to_string(),
            TokKind::Ident(w) => format!("`{w}`"),
            TokKind::Punct(p) => format!("`{p}`"),
            TokKind::Int(v) => format!("`{v}`"),
            TokKind::Address(a) => format!("`0x{a}`"),
            TokKind::Str(_) => "string".to_string(),
            TokKind::Pragma(_) => "pragma".to_string(),
        };
        self.error(t.span, format!("expected {expected}, found {found}"))
    }

    fn expect_punct(&mut self, p: &str) -> PResult<Token> {
        if self.is_punct(p) {
            Ok(self.advance())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            TokKind::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                self.advance();
                Ok(w)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    /// Span from token `start` through the previously consumed token.
    fn span_since(&self, start: usize) -> Span {
        let first = &self.toks[start];
        let last = self.prev();
        let end = last.offset + last.span.len as usize;
        Span::new(first.span.line, first.span.col, end.saturating_sub(first.offset) as u32)
    }

    fn too_many_errors(&self) -> bool {
        self.errors.len() >= MAX_DIAGNOSTICS
    }

    /// Skip to just past the next `;` at this nesting level, or to a `}` that closes it.
    fn sync_stmt(&mut self) {
        let mut depth = 0i32;
        while !self.at_eof() {
            if self.is_punct("{") {
                depth += 1;
            } else if self.is_punct("}") {
                if depth == 0 {
                    return;
                }
                depth -= 1;
                if depth == 0 {
                    self.advance();
                    return;
                }
            } else if self.is_punct(";") && depth == 0 {
                self.advance();
                return;
            }
            self.advance();
        }
    }

    // ---- types ----

    fn is_type_start(&self) -> bool {
        match self.peek() {
            TokKind::Ident(w) if w == "mapping" => true,
            TokKind::Ident(w) if elementary_type(w).is_some() => true,
            TokKind::Ident(w) if w.starts_with("uint") || w.starts_with("int") => {
                // Unsupported widths still start a declaration; `parse_type` reports them.
                let rest = w.trim_start_matches("uint").trim_start_matches("int");
                !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) && matches!(self.peek_at(1), TokKind::Ident(_))
            }
            TokKind::Ident(w) if !KEYWORDS.contains(&w.as_str()) => {
                matches!(self.peek_at(1), TokKind::Ident(x) if !KEYWORDS.contains(&x.as_str()) || x == "payable")
            }
            _ => false,
        }
    }

    fn parse_type(&mut self) -> PResult<TypeExpr> {
        let t = self.tok().clone();
        let TokKind::Ident(word) = &t.kind else {
            return Err(self.unexpected("type"));
        };
        if word == "mapping" {
            self.advance();
            self.expect_punct("(")?;
            let k = self.parse_type()?;
            self.expect_punct("=>")?;
            let v = self.parse_type()?;
            self.expect_punct(")")?;
            return Ok(TypeExpr::Mapping(Box::new(k), Box::new(v)));
        }
        if let Some(ty) = elementary_type(word) {
            self.advance();
            if ty == TypeExpr::Address {
                self.eat_word("payable");
            }
            return Ok(ty);
        }
        if word.starts_with("uint") || word.starts_with("int") {
            let rest = word.trim_start_matches("uint").trim_start_matches("int");
            if rest.bytes().all(|b| b.is_ascii_digit()) {
                self.advance();
                return Err(self.error(t.span, format!("unsupported integer width in `{word}`")));
            }
        }
        if KEYWORDS.contains(&word.as_str()) {
            return Err(self.unexpected("type"));
        }
        let name = word.clone();
        self.advance();
        Ok(TypeExpr::ContractRef(name))
    }

    // ---- top level ----

    fn unit(&mut self, source_name: &str) -> SourceUnit {
        let mut pragma_text = String::new();
        if let TokKind::Pragma(text) = self.peek().clone() {
            pragma_text = text;
            self.advance();
        }
        let mut contracts = Vec::new();
        while !self.at_eof() && !self.too_many_errors() {
            match self.contract() {
                Ok(c) => contracts.push(c),
                Err(Bail) => {
                    // Skip to the next plausible contract start.
                    while !self.at_eof() && !self.is_word("contract") && !self.is_word("abstract") {
                        self.advance();
                    }
                }
            }
        }
        SourceUnit { source_name: source_name.to_string(), pragma_text, contracts }
    }

    fn contract(&mut self) -> PResult<ContractDecl> {
        let start = self.idx;
        let is_abstract = self.eat_word("abstract");
        if !self.eat_word("contract") {
            let b = self.unexpected("`contract`");
            self.advance();
            return Err(b);
        }
        let name = self.expect_ident()?;
        self.expect_punct("{")?;
        let mut contract = ContractDecl {
            name,
            is_abstract,
            state_vars: Vec::new(),
            constructor: None,
            functions: Vec::new(),
            span: Span::NONE,
        };
        while !self.is_punct("}") && !self.at_eof() && !self.too_many_errors() {
            let member_start = self.idx;
            let is_fn = self.is_word("function")
                || (self.is_word("virtual") && matches!(self.peek_at(1), TokKind::Ident(w) if w == "function"));
            let result = if is_fn {
                self.function().map(|f| contract.functions.push(f))
            } else if self.is_word("constructor") {
                self.constructor().map(|f| {
                    if contract.constructor.is_some() {
                        self.errors.push(Diagnostic::name_error(f.span, "duplicate constructor"));
                    } else {
                        contract.constructor = Some(f);
                    }
                })
            } else {
                self.var_decl(StorageClass::State).map(|v| contract.state_vars.push(v))
            };
            if result.is_err() {
                if self.idx == member_start {
                    self.advance();
                }
                self.sync_member();
            }
        }
        self.expect_punct("}")?;
        contract.span = self.span_since(start);
        Ok(contract)
    }

    /// Skip to the next contract member keyword or the contract's closing brace.
    fn sync_member(&mut self) {
        let mut depth = 0i32;
        while !self.at_eof() {
            if depth == 0 && (self.is_word("function") || self.is_word("constructor")) {
                return;
            }
            if self.is_punct("{") {
                depth += 1;
            } else if self.is_punct("}") {
                if depth == 0 {
                    return;
                }
                depth -= 1;
            } else if self.is_punct(";") && depth == 0 {
                self.advance();
                return;
            }
            self.advance();
        }
    }

    fn params(&mut self) -> PResult<Vec<VarDecl>> {
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.is_punct(")") {
            loop {
                let start = self.idx;
                let ty = self.parse_type()?;
                let name = self.expect_ident()?;
                params.push(VarDecl {
                    name,
                    ty,
                    storage: StorageClass::Local,
                    init: None,
                    span: self.span_since(start),
                    patch: false,
                });
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(params)
    }

    fn function(&mut self) -> PResult<FunctionDecl> {
        let start = self.idx;
        let mut is_virtual = self.eat_word("virtual");
        self.advance();
        let name = self.expect_ident()?;
        let params = self.params()?;
        let mut visibility = Visibility::Public;
        let mut is_payable = false;
        loop {
            if self.eat_word("public") || self.eat_word("external") {
                visibility = Visibility::Public;
            } else if self.eat_word("internal") || self.eat_word("private") {
                visibility = Visibility::Internal;
            } else if self.eat_word("payable") {
                is_payable = true;
            } else if self.eat_word("virtual") {
                is_virtual = true;
            } else {
                break;
            }
        }
        let mut returns = None;
        if self.eat_word("returns") {
            self.expect_punct("(")?;
            returns = Some(self.parse_type()?);
            if matches!(self.peek(), TokKind::Ident(_)) {
                self.advance();
            }
            self.expect_punct(")")?;
        }
        let body = if self.eat_punct(";") { None } else { Some(self.block()?) };
        Ok(FunctionDecl {
            name,
            visibility,
            is_payable,
            is_virtual,
            is_constructor: false,
            params,
            returns,
            body,
            span: self.span_since(start),
        })
    }

    fn constructor(&mut self) -> PResult<FunctionDecl> {
        let start = self.idx;
        self.advance();
        let params = self.params()?;
        let mut is_payable = false;
        loop {
            if self.eat_word("public") {
                continue;
            } else if self.eat_word("payable") {
                is_payable = true;
            } else {
                break;
            }
        }
        let body = self.block()?;
        Ok(FunctionDecl {
            name: "constructor".into(),
            visibility: Visibility::Public,
            is_payable,
            is_virtual: false,
            is_constructor: true,
            params,
            returns: None,
            body: Some(body),
            span: self.span_since(start),
        })
    }

    /// `type name ('=' expr)? ;`
    fn var_decl(&mut self, storage: StorageClass) -> PResult<VarDecl> {
        let start = self.idx;
        let var = self.var_decl_no_semi(storage)?;
        let semi = self.expect_punct(";")?;
        Ok(VarDecl { span: self.span_since(start), patch: var.patch || semi.marked, ..var })
    }

    fn var_decl_no_semi(&mut self, storage: StorageClass) -> PResult<VarDecl> {
        let start = self.idx;
        let ty = self.parse_type()?;
        if storage == StorageClass::State {
            while self.eat_word("public") || self.eat_word("internal") || self.eat_word("private") {}
        }
        let name = self.expect_ident()?;
        let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
        let patch = name.starts_with(RESERVED_PREFIX);
        Ok(VarDecl { name, ty, storage, init, span: self.span_since(start), patch })
    }

    // ---- statements ----

    fn block(&mut self) -> PResult<Block> {
        let start = self.idx;
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.is_punct("}") && !self.at_eof() {
            if self.too_many_errors() {
                return Err(Bail);
            }
            let before = self.idx;
            match self.stmt() {
                Ok(s) => stmts.push(s),
                Err(Bail) => {
                    if self.idx == before && !self.is_punct("}") {
                        self.advance();
                    }
                    self.sync_stmt();
                }
            }
        }
        self.expect_punct("}")?;
        Ok(Block { stmts, span: self.span_since(start) })
    }

    /// A braced block, or a single statement wrapped into one.
    fn body(&mut self) -> PResult<Block> {
        if self.is_punct("{") {
            self.block()
        } else {
            let s = self.stmt()?;
            let span = s.span;
            Ok(Block { stmts: vec![s], span })
        }
    }

    pub(crate) fn stmt(&mut self) -> PResult<Stmt> {
        let start = self.idx;
        let kind = if self.eat_word("if") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let then_block = self.body()?;
            let else_block = if self.eat_word("else") { Some(self.body()?) } else { None };
            StmtKind::If { cond, then_block, else_block }
        } else if self.eat_word("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            StmtKind::While { cond, body: self.body()? }
        } else if self.eat_word("for") {
            self.expect_punct("(")?;
            let init = if self.is_punct(";") { None } else { Some(Box::new(self.simple_stmt()?)) };
            self.expect_punct(";")?;
            let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
            self.expect_punct(";")?;
            let step = if self.is_punct(")") { None } else { Some(Box::new(self.simple_stmt()?)) };
            self.expect_punct(")")?;
            StmtKind::For { init, cond, step, body: self.body()? }
        } else {
            let kind = if self.eat_word("return") {
                StmtKind::Return(if self.is_punct(";") { None } else { Some(self.expr()?) })
            } else if self.is_word("require") && matches!(self.peek_at(1), TokKind::Punct("(")) {
                self.advance();
                self.advance();
                let cond = self.expr()?;
                let msg = if self.eat_punct(",") {
                    match self.peek().clone() {
                        TokKind::Str(s) => {
                            self.advance();
                            Some(s)
                        }
                        _ => return Err(self.unexpected("string")),
                    }
                } else {
                    None
                };
                self.expect_punct(")")?;
                StmtKind::Require { cond, msg }
            } else if self.is_word("assert") && matches!(self.peek_at(1), TokKind::Punct("(")) {
                self.advance();
                self.advance();
                let cond = self.expr()?;
                self.expect_punct(")")?;
                StmtKind::Assert(cond)
            } else {
                self.simple_stmt()?.kind
            };
            let semi = self.expect_punct(";")?;
            let mut s = Stmt { kind, span: self.span_since(start), patch: false };
            s.patch = semi.marked || mentions_reserved(&s);
            return Ok(s);
        };
        Ok(Stmt { kind, span: self.span_since(start), patch: false })
    }

    /// Declaration, assignment or expression statement without the trailing `;`.
    fn simple_stmt(&mut self) -> PResult<Stmt> {
        let start = self.idx;
        let kind = if self.is_type_start() {
            StmtKind::Decl(self.var_decl_no_semi(StorageClass::Local)?)
        } else {
            let lhs = self.expr()?;
            let op = match self.peek() {
                TokKind::Punct(p) => AssignOp::from_symbol(p),
                _ => None,
            };
            match op {
                Some(op) => {
                    self.advance();
                    let rhs = self.expr()?;
                    StmtKind::Assign { lhs, op, rhs }
                }
                None => StmtKind::Expr(lhs),
            }
        };
        let mut s = Stmt { kind, span: self.span_since(start), patch: false };
        s.patch = mentions_reserved(&s);
        Ok(s)
    }

    // ---- expressions ----

    pub(crate) fn expr(&mut self) -> PResult<Expr> {
        self.binary(1)
    }

    fn binary_op(&self) -> Option<BinOp> {
        match self.peek() {
            TokKind::Punct(p) => BinOp::from_symbol(p).filter(|op| *op != BinOp::Pow),
            _ => None,
        }
    }

    /// Precedence climbing over the left-associative binary operators.
    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let start = self.idx;
        let mut lhs = self.unary()?;
        while let Some(op) = self.binary_op() {
            let prec = op.precedence();
            if prec < min_prec {
                break;
            }
            self.advance();
            let rhs = self.binary(prec + 1)?;
            lhs = Expr { kind: ExprKind::Binary { op, lhs: Box::new(lhs), rhs: Box::new(rhs) }, span: Span::NONE };
            lhs.span = self.span_since(start);
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let start = self.idx;
        if self.eat_punct("!") {
            let operand = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary { op: UnOp::Not, operand: Box::new(operand) },
                span: self.span_since(start),
            });
        }
        if self.eat_punct("-") {
            // `-5` is a negative literal unless it is the base of `**`.
            if let TokKind::Int(v) = self.peek().clone() {
                if !matches!(self.peek_at(1), TokKind::Punct("**")) {
                    self.advance();
                    return Ok(Expr { kind: ExprKind::Literal(Literal::Int(-v)), span: self.span_since(start) });
                }
            }
            let operand = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Unary { op: UnOp::Neg, operand: Box::new(operand) },
                span: self.span_since(start),
            });
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Expr> {
        let start = self.idx;
        let base = self.postfix()?;
        if self.eat_punct("**") {
            let exp = self.unary()?;
            return Ok(Expr {
                kind: ExprKind::Binary { op: BinOp::Pow, lhs: Box::new(base), rhs: Box::new(exp) },
                span: self.span_since(start),
            });
        }
        Ok(base)
    }

    fn args(&mut self) -> PResult<Vec<Expr>> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if !self.is_punct(")") {
            loop {
                args.push(self.expr()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        self.expect_punct(")")?;
        Ok(args)
    }

    /// `.value(v)` attached to a call, if present.
    fn call_value(&mut self) -> PResult<Option<Box<Expr>>> {
        if self.is_punct(".") && matches!(self.peek_at(1), TokKind::Ident(w) if w == "value") {
            self.advance();
            self.advance();
            self.expect_punct("(")?;
            let v = self.expr()?;
            self.expect_punct(")")?;
            Ok(Some(Box::new(v)))
        } else {
            Ok(None)
        }
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let start = self.idx;
        let mut e = self.primary()?;
        loop {
            if self.eat_punct("[") {
                let key = self.expr()?;
                self.expect_punct("]")?;
                e = Expr { kind: ExprKind::Index { base: Box::new(e), key: Box::new(key) }, span: Span::NONE };
            } else if self.eat_punct(".") {
                let field = match self.peek().clone() {
                    TokKind::Ident(w) => {
                        self.advance();
                        w
                    }
                    _ => return Err(self.unexpected("member name")),
                };
                let target = Box::new(e);
                let kind = match field.as_str() {
                    "call" => {
                        let value = self.call_value()?;
                        self.expect_punct("(")?;
                        if let TokKind::Str(_) = self.peek() {
                            self.advance();
                        }
                        self.expect_punct(")")?;
                        ExprKind::LowLevelCall { target, value }
                    }
                    "delegatecall" => ExprKind::DelegateCall { target, args: self.args()? },
                    _ => {
                        let value = self.call_value()?;
                        if self.is_punct("(") {
                            let args = self.args()?;
                            if field == "transfer" && value.is_none() && args.len() == 1 {
                                let amount = Box::new(args.into_iter().next().unwrap());
                                ExprKind::Transfer { target, amount }
                            } else {
                                ExprKind::CallExternal { target, name: field, args, value }
                            }
                        } else if value.is_some() {
                            return Err(self.unexpected("`(`"));
                        } else {
                            ExprKind::Member { base: target, field }
                        }
                    }
                };
                e = Expr { kind, span: Span::NONE };
            } else if self.eat_punct("++") {
                e = Expr { kind: ExprKind::Unary { op: UnOp::PostInc, operand: Box::new(e) }, span: Span::NONE };
            } else if self.eat_punct("--") {
                e = Expr { kind: ExprKind::Unary { op: UnOp::PostDec, operand: Box::new(e) }, span: Span::NONE };
            } else {
                break;
            }
            e.span = self.span_since(start);
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let start = self.idx;
        let t = self.tok().clone();
        let kind = match t.kind {
            TokKind::Int(v) => {
                self.advance();
                ExprKind::Literal(Literal::Int(v))
            }
            TokKind::Address(hex) => {
                self.advance();
                ExprKind::Literal(Literal::Address(BigUint::from_str_radix(&hex, 16).expect("lexer validated hex")))
            }
            TokKind::Punct("(") => {
                self.advance();
                let mut inner = self.expr()?;
                self.expect_punct(")")?;
                inner.span = self.span_since(start);
                return Ok(inner);
            }
            TokKind::Ident(w) => match w.as_str() {
                "true" | "false" => {
                    self.advance();
                    ExprKind::Literal(Literal::Bool(w == "true"))
                }
                "msg" => {
                    self.advance();
                    self.expect_punct(".")?;
                    if self.eat_word("sender") {
                        ExprKind::MsgSender
                    } else if self.eat_word("value") {
                        ExprKind::MsgValue
                    } else {
                        return Err(self.unexpected("`sender` or `value`"));
                    }
                }
                "new" => {
                    self.advance();
                    let contract = self.expect_ident()?;
                    let args = self.args()?;
                    ExprKind::New { contract, args }
                }
                _ => {
                    if let Some(target) = elementary_type(&w) {
                        if matches!(self.peek_at(1), TokKind::Punct("(")) {
                            self.advance();
                            self.advance();
                            let operand = self.expr()?;
                            self.expect_punct(")")?;
                            return Ok(Expr {
                                kind: ExprKind::Cast { target, operand: Box::new(operand) },
                                span: self.span_since(start),
                            });
                        }
                    }
                    let name = self.expect_ident()?;
                    if self.is_punct("(") {
                        let args = self.args()?;
                        ExprKind::CallInternal { name, args }
                    } else {
                        ExprKind::Ident(name)
                    }
                }
            },
            _ => return Err(self.unexpected("expression")),
        };
        Ok(Expr { kind, span: self.span_since(start) })
    }

    fn finish(self, source_name: &str) -> Result<(), ParseError> {
        if self.errors.is_empty() {
            Ok(())
        } else {
            Err(ParseError { source_name: source_name.to_string(), diagnostics: self.errors })
        }
    }
}

fn mentions_reserved(s: &Stmt) -> bool {
    if let StmtKind::Decl(v) = &s.kind {
        if v.name.starts_with(RESERVED_PREFIX) {
            return true;
        }
    }
    let mut found = false;
    for e in s.own_exprs() {
        e.walk(&mut |x| {
            if let ExprKind::Ident(n) = &x.kind {
                found |= n.starts_with(RESERVED_PREFIX);
            }
        });
    }
    found
}

/// Syntax-only parse of a whole file.
pub fn parse_syntax(source: &str, source_name: &str) -> Result<SourceUnit, ParseError> {
    let mut p = Parser::new(source);
    let unit = p.unit(source_name);
    p.finish(source_name)?;
    Ok(unit)
}

/// Syntax-only parse of a single statement (used to check span soundness).
pub fn parse_stmt(source: &str) -> Result<Stmt, ParseError> {
    let mut p = Parser::new(source);
    let s = p.stmt();
    if s.is_ok() && !p.at_eof() {
        p.unexpected("end of input");
    }
    match s {
        Ok(s) if p.errors.is_empty() => Ok(s),
        _ => {
            p.finish("<stmt>")?;
            unreachable!("a failed parse always records a diagnostic")
        }
    }
}

/// Syntax-only parse of a single expression.
pub fn parse_expr(source: &str) -> Result<Expr, ParseError> {
    let mut p = Parser::new(source);
    let e = p.expr();
    if e.is_ok() && !p.at_eof() {
        p.unexpected("end of input");
    }
    match e {
        Ok(e) if p.errors.is_empty() => Ok(e),
        _ => {
            p.finish("<expr>")?;
            unreachable!("a failed parse always records a diagnostic")
        }
    }
}

/// Parse a type written in source syntax, e.g. `mapping(address => uint256)`.
pub fn parse_type_str(source: &str) -> Option<TypeExpr> {
    let mut p = Parser::new(source);
    let ty = p.parse_type().ok()?;
    (p.at_eof() && p.errors.is_empty()).then_some(ty)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn expr(src: &str) -> Expr {
        let mut e = parse_expr(src).unwrap();
        crate::frontend::ast::strip::expr(&mut e);
        e
    }

    #[test]
    fn precedence_and_associativity() {
        let e = expr("a + b * c - d");
        let ExprKind::Binary { op: BinOp::Sub, lhs, .. } = &e.kind else { panic!("{e:?}") };
        assert!(matches!(lhs.kind, ExprKind::Binary { op: BinOp::Add, .. }));
        let e = expr("a ** b ** c");
        let ExprKind::Binary { op: BinOp::Pow, rhs, .. } = &e.kind else { panic!() };
        assert!(matches!(rhs.kind, ExprKind::Binary { op: BinOp::Pow, .. }));
        let e = expr("-a ** 2");
        assert!(matches!(e.kind, ExprKind::Unary { op: UnOp::Neg, .. }));
        let e = expr("x || y && z == w");
        assert!(matches!(e.kind, ExprKind::Binary { op: BinOp::Or, .. }));
    }

    #[test]
    fn negative_literals_fold() {
        assert_eq!(expr("-128"), Expr::int(-128));
        assert!(matches!(expr("-2 ** 2").kind, ExprKind::Unary { op: UnOp::Neg, .. }));
        assert!(matches!(expr("-(5)").kind, ExprKind::Unary { op: UnOp::Neg, .. }));
    }

    #[test]
    fn call_forms() {
        assert!(matches!(expr("msg.sender.call.value(amount)(\"\")").kind, ExprKind::LowLevelCall { value: Some(_), .. }));
        assert!(matches!(expr("msg.sender.transfer(amount)").kind, ExprKind::Transfer { .. }));
        assert!(matches!(expr("tok.transfer(to, amount)").kind, ExprKind::CallExternal { .. }));
        assert!(matches!(expr("lib.delegatecall(1)").kind, ExprKind::DelegateCall { .. }));
        assert!(matches!(expr("ext.get()").kind, ExprKind::CallExternal { .. }));
        assert!(matches!(expr("new Vault(1)").kind, ExprKind::New { .. }));
        assert!(matches!(expr("uint8(x)").kind, ExprKind::Cast { target: TypeExpr::UInt(8), .. }));
        assert!(matches!(expr("who.balance").kind, ExprKind::Member { .. }));
        assert!(matches!(expr("f(1, 2)").kind, ExprKind::CallInternal { .. }));
    }

    #[test]
    fn statement_forms() {
        let s = parse_stmt("balance[msg.sender] -= amount;").unwrap();
        assert!(matches!(s.kind, StmtKind::Assign { op: AssignOp::SubAssign, .. }));
        let s = parse_stmt("for (uint8 i = 0; i < n; i++) { x = x - 1; }").unwrap();
        assert!(matches!(s.kind, StmtKind::For { init: Some(_), cond: Some(_), step: Some(_), .. }));
        let s = parse_stmt("if (a) x = 1; else if (b) x = 2;").unwrap();
        let StmtKind::If { else_block: Some(b), .. } = &s.kind else { panic!() };
        assert!(matches!(b.stmts[0].kind, StmtKind::If { .. }));
        let s = parse_stmt("_hcc_lock_balance[msg.sender] = true;").unwrap();
        assert!(s.patch);
    }

    #[test]
    fn uint_alias_normalizes() {
        let unit = parse_syntax("contract C { mapping (address => uint) balance; }", "t").unwrap();
        assert_eq!(
            unit.contracts[0].state_vars[0].ty,
            TypeExpr::Mapping(Box::new(TypeExpr::Address), Box::new(TypeExpr::UInt(256)))
        );
    }

    #[test]
    fn errors_are_capped() {
        let src = "contract C { function f() public { ".to_string() + &"x = ;".repeat(50) + " } }";
        let err = parse_syntax(&src, "t").unwrap_err();
        assert_eq!(err.diagnostics.len(), MAX_DIAGNOSTICS);
    }

    #[test]
    fn spans_cover_tokens() {
        let src = "contract C {\n  function f() public {\n    x = a + b;\n  }\n}";
        let unit = parse_syntax(src, "t").unwrap();
        let s = &unit.contracts[0].functions[0].body.as_ref().unwrap().stmts[0];
        assert_eq!(&src[s.span.byte_range(src).unwrap()], "x = a + b;");
    }

    #[test]
    fn abstract_bodyless_functions() {
        let unit = parse_syntax("abstract contract External { virtual function get() public returns(uint); }", "t").unwrap();
        let c = &unit.contracts[0];
        assert!(c.is_abstract);
        assert!(c.functions[0].body.is_none() && c.functions[0].is_virtual);
    }
}
