//! Canonical pretty-printer from AST (or hardened CPG) back to MiniSol source.

use std::fmt::Write as _;

use crate::cpg::Cpg;
use crate::frontend::ast::*;
use crate::frontend::lexer::{escape, PATCH_MARKER};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmitConfig {
    pub indent_width: usize,
    /// Append `/* HCC */` to every synthesized line.
    pub mark_patches: bool,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig { indent_width: 2, mark_patches: false }
    }
}

/// Emit the AST subgraph of `cpg`, including any inserted patches.
pub fn emit_source(cpg: &Cpg, cfg: &EmitConfig) -> String {
    emit_unit(&cpg.to_unit(), cfg)
}

pub fn emit_unit(unit: &SourceUnit, cfg: &EmitConfig) -> String {
    let mut p = Printer { out: String::new(), cfg: *cfg };
    if !unit.pragma_text.is_empty() {
        p.out.push_str(&unit.pragma_text);
        p.out.push('\n');
        if !unit.contracts.is_empty() {
            p.out.push('\n');
        }
    }
    for (i, c) in unit.contracts.iter().enumerate() {
        if i > 0 {
            p.out.push('\n');
        }
        p.contract(c);
    }
    p.out
}

struct Printer {
    out: String,
    cfg: EmitConfig,
}

impl Printer {
    fn line(&mut self, depth: usize, text: &str, patch: bool) {
        for _ in 0..depth * self.cfg.indent_width {
            self.out.push(' ');
        }
        self.out.push_str(text);
        if patch && self.cfg.mark_patches {
            self.out.push(' ');
            self.out.push_str(PATCH_MARKER);
        }
        self.out.push('\n');
    }

    fn contract(&mut self, c: &ContractDecl) {
        let head = if c.is_abstract { "abstract contract" } else { "contract" };
        self.line(0, &format!("{head} {} {{", c.name), false);
        for v in &c.state_vars {
            self.line(1, &format!("{};", var_decl(v)), v.patch);
        }
        for (i, f) in c.all_functions().enumerate() {
            if i > 0 || !c.state_vars.is_empty() {
                self.out.push('\n');
            }
            self.function(f);
        }
        self.line(0, "}", false);
    }

    fn function(&mut self, f: &FunctionDecl) {
        let params: Vec<String> = f.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
        let mut head = if f.is_constructor {
            format!("constructor({}) public", params.join(", "))
        } else {
            let vis = match f.visibility {
                Visibility::Public => "public",
                Visibility::Internal => "internal",
            };
            format!("function {}({}) {vis}", f.name, params.join(", "))
        };
        if f.is_payable {
            head.push_str(" payable");
        }
        if f.is_virtual {
            head.push_str(" virtual");
        }
        if let Some(r) = &f.returns {
            let _ = write!(head, " returns ({r})");
        }
        match &f.body {
            None => self.line(1, &format!("{head};"), false),
            Some(b) => {
                self.line(1, &format!("{head} {{"), false);
                self.stmts(2, &b.stmts);
                self.line(1, "}", false);
            }
        }
    }

    fn stmts(&mut self, depth: usize, stmts: &[Stmt]) {
        for s in stmts {
            self.stmt(depth, s);
        }
    }

    fn stmt(&mut self, depth: usize, s: &Stmt) {
        match &s.kind {
            StmtKind::If { .. } => self.if_chain(depth, s, "if"),
            StmtKind::While { cond, body } => {
                self.line(depth, &format!("while ({}) {{", expr_to_string(cond)), false);
                self.stmts(depth + 1, &body.stmts);
                self.line(depth, "}", false);
            }
            StmtKind::For { init, cond, step, body } => {
                let init = init.as_ref().map(|s| simple_stmt(s)).unwrap_or_default();
                let cond = cond.as_ref().map(expr_to_string).unwrap_or_default();
                let step = step.as_ref().map(|s| simple_stmt(s)).unwrap_or_default();
                let cond = if cond.is_empty() { String::new() } else { format!(" {cond}") };
                let step = if step.is_empty() { String::new() } else { format!(" {step}") };
                self.line(depth, &format!("for ({init};{cond};{step}) {{"), false);
                self.stmts(depth + 1, &body.stmts);
                self.line(depth, "}", false);
            }
            _ => self.line(depth, &format!("{};", simple_stmt(s)), s.patch),
        }
    }

    /// `if` statements, printing a lone nested `if` in an else branch as `else if`.
    fn if_chain(&mut self, depth: usize, s: &Stmt, keyword: &str) {
        let StmtKind::If { cond, then_block, else_block } = &s.kind else { unreachable!() };
        let prefix = if keyword == "if" { String::new() } else { "} ".to_string() };
        self.line(depth, &format!("{prefix}{keyword} ({}) {{", expr_to_string(cond)), false);
        self.stmts(depth + 1, &then_block.stmts);
        match else_block {
            Some(b) if b.stmts.len() == 1 && matches!(b.stmts[0].kind, StmtKind::If { .. }) => {
                self.if_chain(depth, &b.stmts[0], "else if");
            }
            Some(b) => {
                self.line(depth, "} else {", false);
                self.stmts(depth + 1, &b.stmts);
                self.line(depth, "}", false);
            }
            None => self.line(depth, "}", false),
        }
    }
}

fn var_decl(v: &VarDecl) -> String {
    match &v.init {
        Some(e) => format!("{} {} = {}", v.ty, v.name, expr_to_string(e)),
        None => format!("{} {}", v.ty, v.name),
    }
}

/// A non-compound statement without its trailing `;`.
pub fn simple_stmt(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl(v) => var_decl(v),
        StmtKind::Assign { lhs, op, rhs } => format!("{} {} {}", expr_to_string(lhs), op.as_str(), expr_to_string(rhs)),
        StmtKind::Expr(e) => expr_to_string(e),
        StmtKind::Return(None) => "return".into(),
        StmtKind::Return(Some(e)) => format!("return {}", expr_to_string(e)),
        StmtKind::Require { cond, msg: None } => format!("require({})", expr_to_string(cond)),
        StmtKind::Require { cond, msg: Some(m) } => format!("require({}, \"{}\")", expr_to_string(cond), escape(m)),
        StmtKind::Assert(cond) => format!("assert({})", expr_to_string(cond)),
        StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::For { .. } => {
            let mut p = Printer { out: String::new(), cfg: EmitConfig::default() };
            p.stmt(0, s);
            p.out.trim_end().to_string()
        }
    }
}

/// Single-statement rendering with a trailing `;` where the grammar needs one.
pub fn stmt_to_string(s: &Stmt) -> String {
    match s.kind {
        StmtKind::If { .. } | StmtKind::While { .. } | StmtKind::For { .. } => simple_stmt(s),
        _ => format!("{};", simple_stmt(s)),
    }
}

fn is_postfix_safe(e: &Expr) -> bool {
    matches!(
        e.kind,
        ExprKind::Ident(_)
            | ExprKind::Index { .. }
            | ExprKind::Member { .. }
            | ExprKind::CallInternal { .. }
            | ExprKind::CallExternal { .. }
            | ExprKind::LowLevelCall { .. }
            | ExprKind::DelegateCall { .. }
            | ExprKind::Transfer { .. }
            | ExprKind::New { .. }
            | ExprKind::Cast { .. }
            | ExprKind::MsgSender
            | ExprKind::MsgValue
    ) || matches!(&e.kind, ExprKind::Literal(Literal::Int(v)) if v.sign() != num_bigint::Sign::Minus)
        || matches!(e.kind, ExprKind::Literal(Literal::Bool(_) | Literal::Address(_)))
}

fn paren(s: String) -> String {
    format!("({s})")
}

fn postfix_base(e: &Expr) -> String {
    if is_postfix_safe(e) {
        expr_to_string(e)
    } else {
        paren(expr_to_string(e))
    }
}

fn args(list: &[Expr]) -> String {
    list.iter().map(expr_to_string).collect::<Vec<_>>().join(", ")
}

fn value_suffix(value: &Option<Box<Expr>>) -> String {
    match value {
        Some(v) => format!(".value({})", expr_to_string(v)),
        None => String::new(),
    }
}

fn binary_operand(child: &Expr, parent: BinOp, is_rhs: bool) -> String {
    let text = expr_to_string(child);
    let needs = match &child.kind {
        ExprKind::Binary { op, .. } => {
            if op.precedence() != parent.precedence() {
                true
            } else if parent == BinOp::Pow {
                !is_rhs
            } else {
                is_rhs
            }
        }
        ExprKind::Unary { op: UnOp::Not | UnOp::Neg, .. } => parent == BinOp::Pow && !is_rhs,
        ExprKind::Literal(Literal::Int(v)) => parent == BinOp::Pow && !is_rhs && v.sign() == num_bigint::Sign::Minus,
        _ => false,
    };
    if needs {
        paren(text)
    } else {
        text
    }
}

pub fn expr_to_string(e: &Expr) -> String {
    match &e.kind {
        ExprKind::Literal(Literal::Int(v)) => v.to_string(),
        ExprKind::Literal(Literal::Bool(b)) => b.to_string(),
        ExprKind::Literal(Literal::Address(a)) => format!("0x{a:040x}"),
        ExprKind::Ident(n) => n.clone(),
        ExprKind::MsgSender => "msg.sender".into(),
        ExprKind::MsgValue => "msg.value".into(),
        ExprKind::Index { base, key } => format!("{}[{}]", postfix_base(base), expr_to_string(key)),
        ExprKind::Member { base, field } => format!("{}.{field}", postfix_base(base)),
        ExprKind::Binary { op, lhs, rhs } => {
            format!("{} {} {}", binary_operand(lhs, *op, false), op.as_str(), binary_operand(rhs, *op, true))
        }
        ExprKind::Unary { op: UnOp::PostInc | UnOp::PostDec, operand } => {
            let op = if matches!(e.kind, ExprKind::Unary { op: UnOp::PostInc, .. }) { "++" } else { "--" };
            format!("{}{op}", postfix_base(operand))
        }
        ExprKind::Unary { op, operand } => {
            let inner = expr_to_string(operand);
            let plain = matches!(
                operand.kind,
                ExprKind::Ident(_)
                    | ExprKind::Index { .. }
                    | ExprKind::Member { .. }
                    | ExprKind::CallInternal { .. }
                    | ExprKind::CallExternal { .. }
                    | ExprKind::Cast { .. }
                    | ExprKind::MsgValue
            ) || (*op == UnOp::Not
                && matches!(operand.kind, ExprKind::Literal(Literal::Bool(_)) | ExprKind::Unary { op: UnOp::Not, .. }));
            if plain {
                format!("{}{inner}", op.as_str())
            } else {
                format!("{}({inner})", op.as_str())
            }
        }
        ExprKind::Cast { target, operand } => format!("{target}({})", expr_to_string(operand)),
        ExprKind::CallInternal { name, args: a } => format!("{name}({})", args(a)),
        ExprKind::CallExternal { target, name, args: a, value } => {
            format!("{}.{name}{}({})", postfix_base(target), value_suffix(value), args(a))
        }
        ExprKind::LowLevelCall { target, value } => format!("{}.call{}(\"\")", postfix_base(target), value_suffix(value)),
        ExprKind::DelegateCall { target, args: a } => format!("{}.delegatecall({})", postfix_base(target), args(a)),
        ExprKind::Transfer { target, amount } => format!("{}.transfer({})", postfix_base(target), expr_to_string(amount)),
        ExprKind::New { contract, args: a } => format!("new {contract}({})", args(a)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse, parse_expr};

    fn round(src: &str) -> String {
        let e = parse_expr(src).unwrap();
        let printed = expr_to_string(&e);
        let again = parse_expr(&printed).unwrap();
        let mut a = e.clone();
        let mut b = again;
        crate::frontend::ast::strip::expr(&mut a);
        crate::frontend::ast::strip::expr(&mut b);
        assert_eq!(a, b, "{src} -> {printed}");
        printed
    }

    #[test]
    fn empty_contract() {
        let unit = parse("contract C {}", "c").unwrap();
        assert_eq!(emit_unit(&unit, &EmitConfig::default()), "contract C {\n}\n");
    }

    #[test]
    fn parenthesizes_differing_classes() {
        assert_eq!(round("(a + b) * c"), "(a + b) * c");
        assert_eq!(round("a + b * c"), "a + (b * c)");
        assert_eq!(round("a - (b - c)"), "a - (b - c)");
        assert_eq!(round("a - b - c"), "a - b - c");
        assert_eq!(round("a ** b ** c"), "a ** b ** c");
        assert_eq!(round("(a ** b) ** c"), "(a ** b) ** c");
        assert_eq!(round("(-2) ** 2"), "(-2) ** 2");
        assert_eq!(round("-2 ** 2"), "-(2 ** 2)");
        assert_eq!(round("!(a && b)"), "!(a && b)");
        assert_eq!(round("a - -5"), "a - -5");
        assert_eq!(round("-(-x)"), "-(-x)");
        round("x == -128 && !(y == -1)");
    }

    #[test]
    fn constructed_negation_of_literal_round_trips() {
        let e = Expr::unary(UnOp::Neg, Expr::int(5));
        assert_eq!(expr_to_string(&e), "-(5)");
    }

    #[test]
    fn patch_markers() {
        let mut unit = parse("contract C { uint x; function f() public { x = 1; } }", "c").unwrap();
        unit.contracts[0].functions[0].body.as_mut().unwrap().stmts[0].patch = true;
        let cfg = EmitConfig { mark_patches: true, ..Default::default() };
        let text = emit_unit(&unit, &cfg);
        assert!(text.contains("x = 1; /* HCC */"));
        let back = parse(&text, "c").unwrap();
        assert!(back.contracts[0].functions[0].body.as_ref().unwrap().stmts[0].patch);
    }

    #[test]
    fn else_if_chains() {
        let src = "contract C { uint x; function f(uint a) public { if (a == 1) { x = 1; } else if (a == 2) { x = 2; } else { x = 3; } } }";
        let unit = parse(src, "c").unwrap();
        let text = emit_unit(&unit, &EmitConfig::default());
        assert!(text.contains("} else if (a == 2) {"));
        assert!(parse(&text, "c").unwrap().structurally_eq(&unit));
    }
}
