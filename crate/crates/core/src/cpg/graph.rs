//! Labeled property graph storage.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;
use serde_json::Value;

use crate::frontend::ast::{Expr, SourceUnit, Span, Stmt};
use crate::frontend::generic::{self, AstNode};

pub type NodeId = usize;
pub type EdgeId = usize;
pub type PropValue = Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Label {
    Contract,
    Function,
    FallbackFunction,
    Variable,
    LocalVariable,
    StateVariable,
    Statement,
    Expression,
    ExternalCall,
    DelegateCall,
    ConstructorCall,
    ContainsExternalCall,
    StateUpdate,
    BugReentrancy,
    BugInteger,
    Patch,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum EdgeKind {
    AstChild,
    Next,
    CondTrue,
    CondFalse,
    LoopBody,
    LoopBack,
    RefersTo,
    CallsTo,
    WritesState,
    BugRole,
    PatchOf,
}

impl EdgeKind {
    pub const CONTROL_FLOW: [EdgeKind; 5] =
        [EdgeKind::Next, EdgeKind::CondTrue, EdgeKind::CondFalse, EdgeKind::LoopBody, EdgeKind::LoopBack];

    pub fn is_control_flow(&self) -> bool {
        Self::CONTROL_FLOW.contains(self)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpgNode {
    pub id: NodeId,
    /// AST node kind (`Assign`, `Binary`, ...) or a synthetic kind such as `FunctionExit`.
    pub kind: String,
    pub labels: BTreeSet<Label>,
    pub props: BTreeMap<String, PropValue>,
    /// Source position for nodes that came from parsed source.
    pub span: Option<Span>,
}

impl CpgNode {
    pub fn prop_str(&self, key: &str) -> Option<&str> {
        self.props.get(key).and_then(Value::as_str)
    }

    pub fn prop_bool(&self, key: &str) -> bool {
        self.props.get(key).and_then(Value::as_bool).unwrap_or(false)
    }

    pub fn name(&self) -> Option<&str> {
        self.prop_str("name")
    }

    pub fn has(&self, label: Label) -> bool {
        self.labels.contains(&label)
    }

    pub fn line(&self) -> u32 {
        self.span.map(|s| s.line).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CpgEdge {
    pub id: EdgeId,
    pub kind: EdgeKind,
    pub src: NodeId,
    pub dst: NodeId,
    pub props: BTreeMap<String, PropValue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CpgMeta {
    pub source_name: String,
    pub pragma_text: String,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Cpg {
    nodes: Vec<CpgNode>,
    edges: BTreeMap<EdgeId, CpgEdge>,
    next_edge: EdgeId,
    children: Vec<Vec<NodeId>>,
    parent: Vec<Option<NodeId>>,
    out: Vec<BTreeSet<EdgeId>>,
    inc: Vec<BTreeSet<EdgeId>>,
    index: BTreeMap<Label, BTreeSet<NodeId>>,
    roots: Vec<NodeId>,
    exits: BTreeMap<NodeId, NodeId>,
    pub meta: CpgMeta,
}

impl Cpg {
    pub fn new(meta: CpgMeta) -> Self {
        Cpg { meta, ..Default::default() }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn node(&self, id: NodeId) -> &CpgNode {
        &self.nodes[id]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &CpgNode> {
        self.nodes.iter()
    }

    pub fn edges(&self) -> impl Iterator<Item = &CpgEdge> {
        self.edges.values()
    }

    pub fn edge(&self, id: EdgeId) -> Option<&CpgEdge> {
        self.edges.get(&id)
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn contains(&self, id: NodeId) -> bool {
        id < self.nodes.len()
    }

    pub fn add_node(&mut self, kind: &str, span: Option<Span>, props: BTreeMap<String, PropValue>) -> NodeId {
        let id = self.nodes.len();
        self.nodes.push(CpgNode { id, kind: kind.to_string(), labels: BTreeSet::new(), props, span });
        self.children.push(Vec::new());
        self.parent.push(None);
        self.out.push(BTreeSet::new());
        self.inc.push(BTreeSet::new());
        id
    }

    /// Adds `label`; returns true when it was not present before.
    pub fn add_label(&mut self, id: NodeId, label: Label) -> bool {
        let added = self.nodes[id].labels.insert(label);
        if added {
            self.index.entry(label).or_default().insert(id);
        }
        added
    }

    pub fn set_prop(&mut self, id: NodeId, key: &str, value: impl Into<PropValue>) {
        self.nodes[id].props.insert(key.to_string(), value.into());
    }

    pub fn has_label(&self, id: NodeId, label: Label) -> bool {
        self.nodes[id].labels.contains(&label)
    }

    /// Nodes carrying `label`, in id order.
    pub fn nodes_with(&self, label: Label) -> impl Iterator<Item = NodeId> + '_ {
        self.index.get(&label).into_iter().flat_map(|s| s.iter().copied())
    }

    pub fn add_edge(&mut self, kind: EdgeKind, src: NodeId, dst: NodeId, props: BTreeMap<String, PropValue>) -> EdgeId {
        assert!(self.contains(src) && self.contains(dst), "edge endpoints must exist");
        let id = self.next_edge;
        self.next_edge += 1;
        self.edges.insert(id, CpgEdge { id, kind, src, dst, props });
        self.out[src].insert(id);
        self.inc[dst].insert(id);
        id
    }

    pub fn remove_edge(&mut self, id: EdgeId) {
        if let Some(e) = self.edges.remove(&id) {
            self.out[e.src].remove(&id);
            self.inc[e.dst].remove(&id);
        }
    }

    pub fn has_edge(&self, kind: EdgeKind, src: NodeId, dst: NodeId) -> bool {
        self.out_edges(src, kind).any(|e| e.dst == dst)
    }

    pub fn out_edges(&self, id: NodeId, kind: EdgeKind) -> impl Iterator<Item = &CpgEdge> + '_ {
        self.out[id].iter().map(|e| &self.edges[e]).filter(move |e| e.kind == kind)
    }

    pub fn in_edges(&self, id: NodeId, kind: EdgeKind) -> impl Iterator<Item = &CpgEdge> + '_ {
        self.inc[id].iter().map(|e| &self.edges[e]).filter(move |e| e.kind == kind)
    }

    pub fn all_out_edges(&self, id: NodeId) -> impl Iterator<Item = &CpgEdge> + '_ {
        self.out[id].iter().map(|e| &self.edges[e])
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.parent[id]
    }

    /// Pre-order ids of the AST subtree rooted at `id`.
    pub fn subtree(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    pub fn ancestors(&self, id: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        std::iter::successors(self.parent[id], move |p| self.parent[*p])
    }

    pub fn is_statement(&self, id: NodeId) -> bool {
        self.has_label(id, Label::Statement)
    }

    /// Expression nodes owned by statement `id` in pre-order, excluding nested statements.
    pub fn statement_exprs(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack: Vec<NodeId> = self.children[id].iter().rev().copied().collect();
        while let Some(n) = stack.pop() {
            if self.is_statement(n) || self.nodes[n].kind == "Block" {
                continue;
            }
            if self.has_label(n, Label::Expression) {
                out.push(n);
            }
            stack.extend(self.children[n].iter().rev());
        }
        out
    }

    /// Closest statement containing `id` (itself if it is one).
    pub fn enclosing_statement(&self, id: NodeId) -> Option<NodeId> {
        std::iter::once(id).chain(self.ancestors(id)).find(|n| self.is_statement(*n))
    }

    pub fn enclosing_function(&self, id: NodeId) -> Option<NodeId> {
        std::iter::once(id).chain(self.ancestors(id)).find(|n| self.has_label(*n, Label::Function))
    }

    pub fn enclosing_contract(&self, id: NodeId) -> Option<NodeId> {
        std::iter::once(id).chain(self.ancestors(id)).find(|n| self.has_label(*n, Label::Contract))
    }

    /// Append a child under `parent` (or a new root) and return its id.
    pub(crate) fn attach(&mut self, parent: Option<NodeId>, index: Option<usize>, child: NodeId) {
        self.parent[child] = parent;
        match parent {
            Some(p) => {
                let at = index.unwrap_or(self.children[p].len());
                self.children[p].insert(at, child);
                self.add_edge(EdgeKind::AstChild, p, child, BTreeMap::new());
            }
            None => self.roots.push(child),
        }
    }

    /// Insert a generic AST subtree (pre-order ids) below `parent` at child position `index`.
    pub fn insert_subtree(&mut self, parent: Option<NodeId>, index: Option<usize>, node: &AstNode) -> NodeId {
        let id = self.add_node(&node.kind, (node.span != Span::NONE).then_some(node.span), node.attrs.clone());
        label_for_kind(self, id, node);
        self.attach(parent, index, id);
        let patch = node.attrs.get("patch").and_then(Value::as_bool).unwrap_or(false)
            || parent.is_some_and(|p| self.has_label(p, Label::Patch));
        if patch {
            self.add_label(id, Label::Patch);
        }
        for child in &node.children {
            self.insert_subtree(Some(id), None, child);
        }
        id
    }

    /// The AST subtree at `id` in generic form; analysis-only props are dropped.
    pub fn to_ast(&self, id: NodeId) -> AstNode {
        let n = &self.nodes[id];
        let mut attrs = n.props.clone();
        attrs.retain(|k, _| !k.starts_with('@'));
        AstNode {
            kind: n.kind.clone(),
            span: n.span.unwrap_or(Span::NONE),
            children: self.children[id].iter().map(|c| self.to_ast(*c)).collect(),
            attrs,
        }
    }

    /// Typed expression for an expression node.
    pub fn expr(&self, id: NodeId) -> Expr {
        generic::raise_expr(&self.to_ast(id)).expect("CPG expression subtrees are well formed")
    }

    pub fn stmt(&self, id: NodeId) -> Stmt {
        generic::raise_stmt(&self.to_ast(id)).expect("CPG statement subtrees are well formed")
    }

    /// Rebuild the source unit from the AST subgraph.
    pub fn to_unit(&self) -> SourceUnit {
        let mut root = AstNode::new("SourceUnit", Span::NONE);
        root.attrs.insert("source_name".into(), self.meta.source_name.clone().into());
        root.attrs.insert("pragma".into(), self.meta.pragma_text.clone().into());
        root.children = self.roots.iter().map(|r| self.to_ast(*r)).collect();
        generic::raise_unit(&root).expect("CPG AST subgraph is well formed")
    }

    pub(crate) fn exit_node(&self, function: NodeId) -> Option<NodeId> {
        self.exits.get(&function).copied()
    }

    pub(crate) fn ensure_exit_node(&mut self, function: NodeId) -> NodeId {
        if let Some(e) = self.exits.get(&function) {
            return *e;
        }
        let mut props = BTreeMap::new();
        props.insert("@function".to_string(), Value::from(function));
        let id = self.add_node("FunctionExit", None, props);
        self.exits.insert(function, id);
        id
    }

    /// Checks the structural invariants; returns a description of the first violation.
    pub fn validate(&self) -> Result<(), String> {
        for e in self.edges.values() {
            if !self.contains(e.src) || !self.contains(e.dst) {
                return Err(format!("edge {} has a dangling endpoint", e.id));
            }
        }
        for n in &self.nodes {
            for l in &n.labels {
                if !self.index.get(l).is_some_and(|s| s.contains(&n.id)) {
                    return Err(format!("node {} label {l} missing from index", n.id));
                }
            }
        }
        for (l, ids) in &self.index {
            for id in ids {
                if !self.nodes[*id].labels.contains(l) {
                    return Err(format!("index lists node {id} under {l} without the label"));
                }
            }
        }
        for (p, kids) in self.children.iter().enumerate() {
            let ast_out: BTreeSet<NodeId> = self.out_edges(p, EdgeKind::AstChild).map(|e| e.dst).collect();
            let listed: BTreeSet<NodeId> = kids.iter().copied().collect();
            if ast_out != listed {
                return Err(format!("node {p} child list disagrees with AstChild edges"));
            }
        }
        Ok(())
    }
}

fn label_for_kind(cpg: &mut Cpg, id: NodeId, node: &AstNode) {
    let kind = node.kind.as_str();
    match kind {
        "Contract" => {
            cpg.add_label(id, Label::Contract);
        }
        "Function" => {
            cpg.add_label(id, Label::Function);
            let is_ctor = node.attrs.get("constructor").and_then(Value::as_bool).unwrap_or(false);
            let name = node.attrs.get("name").and_then(Value::as_str).unwrap_or("");
            if !is_ctor && (name == "fallback" || name == "receive") {
                cpg.add_label(id, Label::FallbackFunction);
            }
        }
        "VarDecl" => {
            cpg.add_label(id, Label::Variable);
            let state = node.attrs.get("storage").and_then(Value::as_str) == Some("state");
            cpg.add_label(id, if state { Label::StateVariable } else { Label::LocalVariable });
        }
        _ if generic::STMT_KINDS.contains(&kind) => {
            cpg.add_label(id, Label::Statement);
        }
        _ if generic::EXPR_KINDS.contains(&kind) => {
            cpg.add_label(id, Label::Expression);
        }
        _ => {}
    }
}
