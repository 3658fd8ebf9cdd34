//! Graph construction: AST subgraph, identifier references, control flow.

use std::collections::{BTreeMap, VecDeque};

use serde_json::Value;

use super::graph::*;
use super::CpgError;
use crate::frontend::ast::*;
use crate::frontend::generic;
use crate::frontend::types::{ExprCx, Scopes, Ty, UnitInfo};

/// AST subgraph plus structural labels. Ids follow AST pre-order.
pub fn build_cpg(unit: &SourceUnit) -> Cpg {
    let mut cpg = Cpg::new(CpgMeta { source_name: unit.source_name.clone(), pragma_text: unit.pragma_text.clone() });
    for c in &unit.contracts {
        cpg.insert_subtree(None, None, &generic::lower_contract(c));
    }
    cpg
}

/// Build, resolve references and add control flow in one step.
pub fn build_full(unit: &SourceUnit) -> Result<Cpg, CpgError> {
    let mut cpg = build_cpg(unit);
    resolve_references(&mut cpg)?;
    add_control_flow(&mut cpg);
    Ok(cpg)
}

/// Prop holding the static type of an expression node.
pub const TYPE_PROP: &str = "@type";

fn ty_text(t: &Ty) -> String {
    match t {
        Ty::Known(t) => t.to_string(),
        Ty::Literal(_) => "literal".into(),
        Ty::Void => "void".into(),
    }
}

struct ContractNodes {
    state_vars: BTreeMap<String, NodeId>,
    functions: BTreeMap<String, NodeId>,
    constructor: Option<NodeId>,
}

fn index_contracts(cpg: &Cpg) -> BTreeMap<String, ContractNodes> {
    let mut out = BTreeMap::new();
    for &root in cpg.roots() {
        let mut entry = ContractNodes { state_vars: BTreeMap::new(), functions: BTreeMap::new(), constructor: None };
        for &child in cpg.children(root) {
            let node = cpg.node(child);
            let name = node.name().unwrap_or_default().to_string();
            match node.kind.as_str() {
                "VarDecl" => {
                    entry.state_vars.entry(name).or_insert(child);
                }
                "Function" if node.prop_bool("constructor") => entry.constructor = Some(child),
                "Function" => {
                    entry.functions.entry(name).or_insert(child);
                }
                _ => {}
            }
        }
        out.entry(cpg.node(root).name().unwrap_or_default().to_string()).or_insert(entry);
    }
    out
}

fn has_body(cpg: &Cpg, function: NodeId) -> bool {
    cpg.children(function).iter().any(|c| cpg.node(*c).kind == "Block")
}

struct Resolver<'a> {
    info: UnitInfo,
    contracts: BTreeMap<String, ContractNodes>,
    contract: String,
    cpg: &'a mut Cpg,
}

impl Resolver<'_> {
    fn edge(&mut self, kind: EdgeKind, src: NodeId, dst: NodeId) {
        if !self.cpg.has_edge(kind, src, dst) {
            self.cpg.add_edge(kind, src, dst, BTreeMap::new());
        }
    }

    fn expr(&mut self, scopes: &Scopes<NodeId>, e: &Expr, id: NodeId) -> Result<(), CpgError> {
        let cx = ExprCx { unit: &self.info, contract: &self.contract, locals: scopes };
        let ty = cx.expr_type(e).map_err(|d| CpgError::Name { span: d.span, message: d.message })?;
        self.cpg.set_prop(id, TYPE_PROP, ty_text(&ty));
        match &e.kind {
            ExprKind::Ident(name) => {
                let target = match scopes.lookup(name) {
                    Some((_, decl)) => Some(*decl),
                    None => self.contracts.get(&self.contract).and_then(|c| c.state_vars.get(name).copied()),
                };
                match target {
                    Some(t) => self.edge(EdgeKind::RefersTo, id, t),
                    None => return Err(CpgError::Name { span: e.span, message: format!("undeclared identifier `{name}`") }),
                }
            }
            ExprKind::CallInternal { name, .. } => {
                if let Some(f) = self.contracts.get(&self.contract).and_then(|c| c.functions.get(name).copied()) {
                    self.edge(EdgeKind::CallsTo, id, f);
                }
            }
            ExprKind::CallExternal { target, name, .. } => {
                if let Ok(Ty::Known(TypeExpr::ContractRef(cname))) = cx.expr_type(target) {
                    let callee = self.contracts.get(&cname).and_then(|c| c.functions.get(name).copied());
                    if let Some(f) = callee.filter(|f| has_body(self.cpg, *f)) {
                        self.edge(EdgeKind::CallsTo, id, f);
                    }
                }
            }
            ExprKind::New { contract, .. } => {
                if let Some(ctor) = self.contracts.get(contract).and_then(|c| c.constructor) {
                    self.edge(EdgeKind::CallsTo, id, ctor);
                }
            }
            _ => {}
        }
        let kids = self.cpg.children(id).to_vec();
        for (child, kid) in e.children().into_iter().zip(kids) {
            self.expr(scopes, child, kid)?;
        }
        Ok(())
    }

    fn block(&mut self, scopes: &mut Scopes<NodeId>, b: &Block, id: NodeId) -> Result<(), CpgError> {
        scopes.push();
        let kids = self.cpg.children(id).to_vec();
        for (s, kid) in b.stmts.iter().zip(kids) {
            self.stmt(scopes, s, kid)?;
        }
        scopes.pop();
        Ok(())
    }

    fn stmt(&mut self, scopes: &mut Scopes<NodeId>, s: &Stmt, id: NodeId) -> Result<(), CpgError> {
        let kids = self.cpg.children(id).to_vec();
        match &s.kind {
            StmtKind::Decl(v) => {
                let var = kids[0];
                if let Some(init) = &v.init {
                    let init_id = self.cpg.children(var)[0];
                    self.expr(scopes, init, init_id)?;
                }
                scopes.declare(&v.name, v.ty.clone(), var);
            }
            StmtKind::Assign { lhs, rhs, .. } => {
                self.expr(scopes, lhs, kids[0])?;
                self.expr(scopes, rhs, kids[1])?;
            }
            StmtKind::Expr(e) | StmtKind::Assert(e) | StmtKind::Require { cond: e, .. } => self.expr(scopes, e, kids[0])?,
            StmtKind::Return(e) => {
                if let Some(e) = e {
                    self.expr(scopes, e, kids[0])?;
                }
            }
            StmtKind::If { cond, then_block, else_block } => {
                self.expr(scopes, cond, kids[0])?;
                self.block(scopes, then_block, kids[1])?;
                if let Some(b) = else_block {
                    self.block(scopes, b, kids[2])?;
                }
            }
            StmtKind::While { cond, body } => {
                self.expr(scopes, cond, kids[0])?;
                self.block(scopes, body, kids[1])?;
            }
            StmtKind::For { init, cond, step, body } => {
                scopes.push();
                let mut k = kids.into_iter();
                if let Some(i) = init {
                    self.stmt(scopes, i, k.next().expect("for init child"))?;
                }
                if let Some(c) = cond {
                    self.expr(scopes, c, k.next().expect("for cond child"))?;
                }
                if let Some(st) = step {
                    self.stmt(scopes, st, k.next().expect("for step child"))?;
                }
                self.block(scopes, body, k.next().expect("for body child"))?;
                scopes.pop();
            }
        }
        Ok(())
    }
}

/// Adds RefersTo and CallsTo edges and annotates expressions with their static type.
pub fn resolve_references(cpg: &mut Cpg) -> Result<(), CpgError> {
    let unit = cpg.to_unit();
    let info = UnitInfo::new(&unit);
    let contracts = index_contracts(cpg);
    let roots = cpg.roots().to_vec();
    let mut r = Resolver { info, contracts, contract: String::new(), cpg };
    for root in roots {
        r.contract = r.cpg.node(root).name().unwrap_or_default().to_string();
        for member in r.cpg.children(root).to_vec() {
            let kind = r.cpg.node(member).kind.clone();
            if kind == "VarDecl" {
                let v = generic::raise_var(&r.cpg.to_ast(member)).expect("well-formed declaration");
                if let Some(init) = &v.init {
                    let init_id = r.cpg.children(member)[0];
                    r.expr(&Scopes::default(), init, init_id)?;
                }
                continue;
            }
            let f = generic::raise_function(&r.cpg.to_ast(member)).expect("well-formed function");
            let mut scopes = Scopes::<NodeId>::default();
            let kids = r.cpg.children(member).to_vec();
            for (p, pid) in f.params.iter().zip(&kids) {
                scopes.declare(&p.name, p.ty.clone(), *pid);
            }
            if let (Some(body), Some(bid)) = (&f.body, kids.last()) {
                r.block(&mut scopes, body, *bid)?;
            }
        }
    }
    Ok(())
}

#[derive(Clone, Copy)]
enum Succ {
    /// Fall through to this node with this edge kind.
    Node(NodeId, EdgeKind),
    /// End of the function body.
    Exit,
}

struct Flow<'a> {
    cpg: &'a mut Cpg,
    function: NodeId,
}

impl Flow<'_> {
    fn edge(&mut self, kind: EdgeKind, src: NodeId, dst: NodeId) {
        self.cpg.add_edge(kind, src, dst, BTreeMap::new());
    }

    fn target(&mut self, succ: Succ) -> NodeId {
        match succ {
            Succ::Node(n, _) => n,
            Succ::Exit => self.cpg.ensure_exit_node(self.function),
        }
    }

    /// Links the statements of a block; returns the entry node of its first statement.
    fn block(&mut self, block: NodeId, succ: Succ) -> Option<NodeId> {
        let mut next = succ;
        let mut entry = None;
        for s in self.cpg.children(block).to_vec().into_iter().rev() {
            let e = self.stmt(s, next);
            next = Succ::Node(e, EdgeKind::Next);
            entry = Some(e);
        }
        entry
    }

    fn stmt(&mut self, s: NodeId, succ: Succ) -> NodeId {
        let kids = self.cpg.children(s).to_vec();
        let node = self.cpg.node(s).clone();
        match node.kind.as_str() {
            "If" => {
                let then_entry = self.block(kids[1], succ);
                let t = match then_entry {
                    Some(t) => t,
                    None => self.target(succ),
                };
                self.edge(EdgeKind::CondTrue, s, t);
                let else_entry = kids.get(2).and_then(|b| self.block(*b, succ));
                let f = match else_entry {
                    Some(f) => f,
                    None => self.target(succ),
                };
                self.edge(EdgeKind::CondFalse, s, f);
                s
            }
            "While" => {
                let body = self.block(kids[1], Succ::Node(s, EdgeKind::LoopBack));
                match body {
                    Some(b) => self.edge(EdgeKind::LoopBody, s, b),
                    None => self.edge(EdgeKind::LoopBack, s, s),
                }
                let exit = self.target(succ);
                self.edge(EdgeKind::Next, s, exit);
                s
            }
            "For" => {
                let mut k = kids.into_iter();
                let init = node.prop_bool("has_init").then(|| k.next().expect("init"));
                if node.prop_bool("has_cond") {
                    k.next();
                }
                let step = node.prop_bool("has_step").then(|| k.next().expect("step"));
                let body = k.next().expect("body");
                if let Some(st) = step {
                    self.edge(EdgeKind::LoopBack, st, s);
                }
                let body_succ = match step {
                    Some(st) => Succ::Node(st, EdgeKind::Next),
                    None => Succ::Node(s, EdgeKind::LoopBack),
                };
                match (self.block(body, body_succ), step) {
                    (Some(b), _) => self.edge(EdgeKind::LoopBody, s, b),
                    (None, Some(st)) => self.edge(EdgeKind::LoopBody, s, st),
                    (None, None) => self.edge(EdgeKind::LoopBack, s, s),
                }
                let exit = self.target(succ);
                self.edge(EdgeKind::Next, s, exit);
                match init {
                    Some(i) => {
                        self.edge(EdgeKind::Next, i, s);
                        i
                    }
                    None => s,
                }
            }
            "Return" => s,
            _ => {
                if let Succ::Node(t, kind) = succ {
                    self.edge(kind, s, t);
                }
                s
            }
        }
    }
}

fn function_body(cpg: &Cpg, function: NodeId) -> Option<NodeId> {
    cpg.children(function).iter().copied().find(|c| cpg.node(*c).kind == "Block")
}

/// (Re)computes control-flow edges for one function.
pub fn add_function_control_flow(cpg: &mut Cpg, function: NodeId) {
    let Some(body) = function_body(cpg, function) else { return };
    let mut stale: Vec<EdgeId> = Vec::new();
    let mut scope = cpg.subtree(body);
    scope.extend(cpg.exit_node(function));
    for n in scope {
        stale.extend(cpg.all_out_edges(n).filter(|e| e.kind.is_control_flow()).map(|e| e.id));
    }
    for e in stale {
        cpg.remove_edge(e);
    }
    Flow { cpg, function }.block(body, Succ::Exit);
}

/// Control-flow edges for every function body.
pub fn add_control_flow(cpg: &mut Cpg) {
    let functions: Vec<NodeId> = cpg.nodes_with(Label::Function).collect();
    for f in functions {
        add_function_control_flow(cpg, f);
    }
}

/// Control-flow successors of `id`.
pub fn cfg_successors(cpg: &Cpg, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
    cpg.all_out_edges(id).filter(|e| e.kind.is_control_flow()).map(|e| e.dst)
}

/// True iff a non-empty control-flow path leads from `from` to `to`.
pub fn cfg_reachable(cpg: &Cpg, from: NodeId, to: NodeId) -> Result<bool, CpgError> {
    for n in [from, to] {
        if !cpg.contains(n) || !cpg.is_statement(n) {
            return Err(CpgError::Domain(format!("node {n} is not a statement")));
        }
    }
    if cpg.enclosing_function(from) != cpg.enclosing_function(to) || cpg.enclosing_function(from).is_none() {
        return Err(CpgError::Domain(format!("nodes {from} and {to} are not in one function")));
    }
    let mut seen = vec![false; cpg.node_count()];
    let mut queue: VecDeque<NodeId> = cfg_successors(cpg, from).collect();
    while let Some(n) = queue.pop_front() {
        if n == to {
            return Ok(true);
        }
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        queue.extend(cfg_successors(cpg, n));
    }
    Ok(false)
}

/// All statements reachable from `from` by a non-empty path (includes `from` on a cycle).
pub fn cfg_reachable_set(cpg: &Cpg, from: NodeId) -> Vec<bool> {
    let mut seen = vec![false; cpg.node_count()];
    let mut queue: VecDeque<NodeId> = cfg_successors(cpg, from).collect();
    while let Some(n) = queue.pop_front() {
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        queue.extend(cfg_successors(cpg, n));
    }
    seen
}

/// Parsed static type of an expression node, if annotated.
pub fn node_type(cpg: &Cpg, id: NodeId) -> Option<TypeExpr> {
    match cpg.node(id).props.get(TYPE_PROP) {
        Some(Value::String(s)) => crate::frontend::parser::parse_type_str(s),
        _ => None,
    }
}
