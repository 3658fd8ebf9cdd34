//! Name resolution and type checking over a parsed unit.

use std::collections::HashSet;

use super::ast::*;
use super::types::{assignable, binary_type, ExprCx, Scopes, Ty, UnitInfo};
use super::{Diagnostic, MAX_DIAGNOSTICS};

struct Checker<'a> {
    info: UnitInfo,
    unit: &'a SourceUnit,
    diags: Vec<Diagnostic>,
}

impl<'a> Checker<'a> {
    fn report(&mut self, d: Diagnostic) {
        if self.diags.len() < MAX_DIAGNOSTICS {
            self.diags.push(d);
        }
    }

    fn check_type(&mut self, ty: &TypeExpr, span: Span, allow_mapping: bool) {
        match ty {
            TypeExpr::Mapping(k, v) => {
                if !allow_mapping {
                    self.report(Diagnostic::type_error(span, "mappings are only allowed as state variables"));
                }
                if !matches!(**k, TypeExpr::Address | TypeExpr::UInt(_)) {
                    self.report(Diagnostic::type_error(span, format!("mapping key must be address or uint, found {k}")));
                }
                self.check_type(v, span, true);
            }
            TypeExpr::ContractRef(name) if self.unit.contract(name).is_none() => {
                self.report(Diagnostic::name_error(span, format!("unknown type `{name}`")));
            }
            _ => {}
        }
    }

    fn run(&mut self) {
        let mut names = HashSet::new();
        for c in &self.unit.contracts {
            if !names.insert(c.name.as_str()) {
                self.report(Diagnostic::name_error(c.span, format!("duplicate contract `{}`", c.name)));
            }
            self.contract(c);
        }
    }

    fn contract(&mut self, c: &ContractDecl) {
        let mut seen = HashSet::new();
        for v in &c.state_vars {
            if !seen.insert(v.name.as_str()) {
                self.report(Diagnostic::name_error(v.span, format!("duplicate state variable `{}`", v.name)));
            }
            self.check_type(&v.ty, v.span, true);
            if let Some(init) = &v.init {
                let scopes = Scopes::<()>::default();
                self.typed_init(c, &scopes, &v.ty, init);
            }
        }
        let mut fn_names = HashSet::new();
        for f in &c.functions {
            if !fn_names.insert(f.name.as_str()) {
                self.report(Diagnostic::name_error(f.span, format!("duplicate function `{}`", f.name)));
            }
            if seen.contains(f.name.as_str()) {
                self.report(Diagnostic::name_error(f.span, format!("`{}` is already a state variable", f.name)));
            }
        }
        for f in c.all_functions() {
            self.function(c, f);
        }
    }

    fn typed_init(&mut self, c: &ContractDecl, scopes: &Scopes<()>, ty: &TypeExpr, init: &Expr) {
        let cx = ExprCx { unit: &self.info, contract: &c.name, locals: scopes };
        match cx.expr_type(init) {
            Ok(t) if assignable(&t, ty) => {}
            Ok(t) => self.report(Diagnostic::type_error(init.span, format!("cannot assign {} to {ty}", t.describe()))),
            Err(d) => self.report(d),
        }
    }

    fn function(&mut self, c: &ContractDecl, f: &FunctionDecl) {
        let mut scopes = Scopes::<()>::default();
        for p in &f.params {
            self.check_type(&p.ty, p.span, false);
            if !scopes.declare(&p.name, p.ty.clone(), ()) {
                self.report(Diagnostic::name_error(p.span, format!("duplicate parameter `{}`", p.name)));
            }
        }
        if let Some(r) = &f.returns {
            self.check_type(r, f.span, false);
        }
        match &f.body {
            Some(body) => {
                scopes.push();
                self.block(c, f, &mut scopes, body);
                scopes.pop();
            }
            None if !c.is_abstract => {
                self.report(Diagnostic::syntax(f.span, format!("function `{}` needs a body", f.name)));
            }
            None => {}
        }
    }

    fn block(&mut self, c: &ContractDecl, f: &FunctionDecl, scopes: &mut Scopes<()>, b: &Block) {
        for s in &b.stmts {
            self.stmt(c, f, scopes, s);
        }
    }

    fn scoped_block(&mut self, c: &ContractDecl, f: &FunctionDecl, scopes: &mut Scopes<()>, b: &Block) {
        scopes.push();
        self.block(c, f, scopes, b);
        scopes.pop();
    }

    fn expr(&mut self, c: &ContractDecl, scopes: &Scopes<()>, e: &Expr) -> Option<Ty> {
        let cx = ExprCx { unit: &self.info, contract: &c.name, locals: scopes };
        match cx.expr_type(e) {
            Ok(t) => Some(t),
            Err(d) => {
                self.report(d);
                None
            }
        }
    }

    fn cond(&mut self, c: &ContractDecl, scopes: &Scopes<()>, e: &Expr) {
        if let Some(t) = self.expr(c, scopes, e) {
            if !t.is_bool() {
                self.report(Diagnostic::type_error(e.span, format!("condition must be bool, found {}", t.describe())));
            }
        }
    }

    fn stmt(&mut self, c: &ContractDecl, f: &FunctionDecl, scopes: &mut Scopes<()>, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl(v) => {
                self.check_type(&v.ty, v.span, false);
                if let Some(init) = &v.init {
                    self.typed_init(c, scopes, &v.ty, init);
                }
                if !scopes.declare(&v.name, v.ty.clone(), ()) {
                    self.report(Diagnostic::name_error(v.span, format!("`{}` is already declared in this scope", v.name)));
                }
            }
            StmtKind::Assign { lhs, op, rhs } => {
                if lhs.lvalue_root().is_none() {
                    self.report(Diagnostic::type_error(lhs.span, "left side of assignment is not assignable"));
                    return;
                }
                let (Some(lt), Some(rt)) = (self.expr(c, scopes, lhs), self.expr(c, scopes, rhs)) else { return };
                let Ty::Known(lty) = &lt else { return };
                if lty.is_mapping() {
                    self.report(Diagnostic::type_error(lhs.span, "cannot assign to a whole mapping"));
                    return;
                }
                let ok = match op {
                    AssignOp::Assign => assignable(&rt, lty),
                    AssignOp::AddAssign | AssignOp::SubAssign => {
                        let bop = if *op == AssignOp::AddAssign { BinOp::Add } else { BinOp::Sub };
                        lty.is_integer() && binary_type(bop, &lt, &rt).is_ok_and(|t| assignable(&t, lty))
                    }
                };
                if !ok {
                    self.report(Diagnostic::type_error(
                        s.span,
                        format!("cannot apply `{}` with {} to {lty}", op.as_str(), rt.describe()),
                    ));
                }
            }
            StmtKind::Expr(e) => {
                self.expr(c, scopes, e);
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.cond(c, scopes, cond);
                self.scoped_block(c, f, scopes, then_block);
                if let Some(b) = else_block {
                    self.scoped_block(c, f, scopes, b);
                }
            }
            StmtKind::While { cond, body } => {
                self.cond(c, scopes, cond);
                self.scoped_block(c, f, scopes, body);
            }
            StmtKind::For { init, cond, step, body } => {
                scopes.push();
                if let Some(i) = init {
                    self.stmt(c, f, scopes, i);
                }
                if let Some(e) = cond {
                    self.cond(c, scopes, e);
                }
                if let Some(st) = step {
                    if matches!(st.kind, StmtKind::Decl(_)) {
                        self.report(Diagnostic::syntax(st.span, "declaration not allowed in loop step"));
                    }
                    self.stmt(c, f, scopes, st);
                }
                self.scoped_block(c, f, scopes, body);
                scopes.pop();
            }
            StmtKind::Return(e) => match (e, &f.returns) {
                (None, None) => {}
                (Some(e), Some(rt)) => {
                    if let Some(t) = self.expr(c, scopes, e) {
                        if !assignable(&t, rt) {
                            self.report(Diagnostic::type_error(e.span, format!("cannot return {} as {rt}", t.describe())));
                        }
                    }
                }
                (Some(e), None) => self.report(Diagnostic::type_error(e.span, "function returns nothing")),
                (None, Some(rt)) => self.report(Diagnostic::type_error(s.span, format!("missing return value of type {rt}"))),
            },
            StmtKind::Require { cond, .. } => self.cond(c, scopes, cond),
            StmtKind::Assert(cond) => self.cond(c, scopes, cond),
        }
    }
}

/// All name and type diagnostics for `unit`, at most [`MAX_DIAGNOSTICS`].
pub fn check(unit: &SourceUnit) -> Vec<Diagnostic> {
    let mut checker = Checker { info: UnitInfo::new(unit), unit, diags: Vec::new() };
    checker.run();
    checker.diags
}

#[cfg(test)]
mod tests {
    use super::super::{parse, DiagnosticKind};

    fn first_kind(src: &str) -> DiagnosticKind {
        parse(src, "t").unwrap_err().diagnostics[0].kind
    }

    #[test]
    fn duplicate_names() {
        assert_eq!(first_kind("contract C {} contract C {}"), DiagnosticKind::NameError);
        assert_eq!(first_kind("contract C { uint x; bool x; }"), DiagnosticKind::NameError);
        assert_eq!(first_kind("contract C { function f() public { uint x = 1; uint x = 2; } }"), DiagnosticKind::NameError);
    }

    #[test]
    fn type_rules() {
        assert_eq!(first_kind("contract C { function f() public { uint8 x = 300; } }"), DiagnosticKind::TypeError);
        assert_eq!(first_kind("contract C { function f() public { mapping(address => bool) m; } }"), DiagnosticKind::TypeError);
        assert_eq!(first_kind("contract C { function f() public { if (1) { } } }"), DiagnosticKind::TypeError);
        assert_eq!(
            first_kind("contract C { function f(uint8 a, int8 b) public { uint8 c = a + b; } }"),
            DiagnosticKind::TypeError
        );
    }

    #[test]
    fn scoping() {
        assert!(parse("contract C { function f() public { if (true) { uint a = 1; } uint a = 2; } }", "t").is_ok());
        assert_eq!(
            first_kind("contract C { function f() public { if (true) { uint a = 1; } a = 2; } }"),
            DiagnosticKind::NameError
        );
    }

    #[test]
    fn well_typed_listing() {
        let src = r#"
contract Bank {
  mapping (address => uint) balance;
  function deposit() payable {
    if (msg.value > 0) { balance[msg.sender] += msg.value; }
  }
  function removeAccount() public {
    uint amount = balance[msg.sender];
    if (amount > 0) {
      msg.sender.call.value(amount)("");
      balance[msg.sender] = 0;
    }
  }
}"#;
        parse(src, "t").unwrap();
    }
}
