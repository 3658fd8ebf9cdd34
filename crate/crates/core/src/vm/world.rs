//! Tree-walking interpreter over deployed contract instances.
//!
//! A world holds contract instances, account balances and an optional
//! scripted adversary. Transactions run to completion or revert; a revert
//! restores the snapshot taken at the transaction start.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_traits::Zero;
use serde::Serialize;

use crate::frontend::ast::*;

use super::value::{self, ArithError, Value};
use super::VmError;

pub type Address = BigUint;

/// Statements a single transaction may execute before it is aborted.
pub const MAX_STEPS: u64 = 1_000_000;
/// Nested function invocations allowed per transaction.
pub const MAX_CALL_DEPTH: usize = 128;

pub fn fmt_addr(a: &Address) -> String {
    format!("0x{a:x}")
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Storage {
    slots: BTreeMap<(String, Vec<BigInt>), Value>,
}

impl Storage {
    pub fn get(&self, var: &str, keys: &[BigInt]) -> Option<&Value> {
        self.slots.get(&(var.to_string(), keys.to_vec()))
    }

    pub fn set(&mut self, var: &str, keys: Vec<BigInt>, v: Value) {
        self.slots.insert((var.to_string(), keys), v);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&(String, Vec<BigInt>), &Value)> {
        self.slots.iter()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub contract: String,
    pub storage: Storage,
}

/// A call the adversary performs from inside a reaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryCall {
    pub to: Address,
    pub function: String,
    pub args: Vec<Value>,
    pub value: BigInt,
}

/// What the adversary does on its `on`-th incoming call within a transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Reaction {
    /// 1-based index of the incoming call or value transfer.
    pub on: u32,
    /// Restricts the reaction to one transaction (0-based index); `None` means any.
    pub tx: Option<usize>,
    /// Empty means do nothing.
    pub calls: Vec<AdversaryCall>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversaryScript {
    pub address: Address,
    pub reactions: Vec<Reaction>,
    pub max_depth: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxCall {
    pub sender: Address,
    pub to: Address,
    pub function: String,
    pub args: Vec<Value>,
    pub value: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "event")]
pub enum Event {
    StorageWrite { addr: String, var: String, key: Vec<String>, old: Value, new: Value, rolled_back: bool },
    ExternalCall { from: String, to: String, func: Option<String>, value: String },
    ValueTransfer { from: String, to: String, amount: String },
    Revert { reason: String },
    Success { ret: Option<Value> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxTrace {
    pub events: Vec<Event>,
    pub steps: u64,
}

impl TxTrace {
    pub fn reverted(&self) -> bool {
        matches!(self.events.last(), Some(Event::Revert { .. }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct World {
    unit: Arc<SourceUnit>,
    pub contracts: BTreeMap<Address, Instance>,
    pub balances: BTreeMap<Address, BigInt>,
    pub adversary: Option<AdversaryScript>,
    next_address: Address,
    /// Statements executed over the world's lifetime.
    pub step_count: u64,
    /// Index of the next transaction.
    pub tx_index: usize,
}

#[derive(Clone)]
struct Snapshot {
    contracts: BTreeMap<Address, Instance>,
    balances: BTreeMap<Address, BigInt>,
    next_address: Address,
}

impl World {
    pub fn new(unit: SourceUnit) -> Self {
        World {
            unit: Arc::new(unit),
            contracts: BTreeMap::new(),
            balances: BTreeMap::new(),
            adversary: None,
            next_address: BigUint::from(0xc0_0000u32),
            step_count: 0,
            tx_index: 0,
        }
    }

    pub fn unit(&self) -> &SourceUnit {
        &self.unit
    }

    pub fn balance(&self, a: &Address) -> BigInt {
        self.balances.get(a).cloned().unwrap_or_default()
    }

    pub fn set_balance(&mut self, a: Address, amount: BigInt) {
        self.balances.insert(a, amount);
    }

    /// Reads a state slot, defaulting unset entries.
    pub fn storage_value(&self, at: &Address, var: &str, keys: &[BigInt]) -> Option<Value> {
        let inst = self.contracts.get(at)?;
        if let Some(v) = inst.storage.get(var, keys) {
            return Some(v.clone());
        }
        let mut ty = &self.unit.contract(&inst.contract)?.state_var(var)?.ty;
        for _ in keys {
            match ty {
                TypeExpr::Mapping(_, v) => ty = v,
                _ => return None,
            }
        }
        Some(Value::default_for(ty))
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { contracts: self.contracts.clone(), balances: self.balances.clone(), next_address: self.next_address.clone() }
    }

    fn restore(&mut self, s: Snapshot) {
        self.contracts = s.contracts;
        self.balances = s.balances;
        self.next_address = s.next_address;
    }

    /// Deploys `contract` outside any transaction, e.g. from a scenario file.
    pub fn deploy(
        &mut self,
        contract: &str,
        address: Option<Address>,
        balance: BigInt,
        args: Vec<Value>,
        deployer: Address,
    ) -> Result<Address, VmError> {
        let decl = self.unit.contract(contract).ok_or_else(|| VmError::UnknownContract(contract.to_string()))?;
        let expected = decl.constructor.as_ref().map_or(0, |c| c.params.len());
        if args.len() != expected {
            return Err(VmError::Arity { function: "constructor".into(), expected, found: args.len() });
        }
        if let Some(a) = &address {
            if self.contracts.contains_key(a) {
                return Err(VmError::AddressInUse(fmt_addr(a)));
            }
        }
        let snap = self.snapshot();
        let mut exec = Exec::new(self, deployer.clone());
        let res = exec.deploy(contract, address, args, deployer, BigInt::zero());
        let steps = exec.steps;
        self.step_count += steps;
        match res {
            Ok(addr) => {
                *self.balances.entry(addr.clone()).or_default() += balance;
                Ok(addr)
            }
            Err(h) => {
                self.restore(snap);
                Err(VmError::DeployReverted { contract: contract.to_string(), reason: h.reason().to_string() })
            }
        }
    }

    /// Runs one transaction. Reverts are part of the trace; only malformed calls are errors.
    pub fn execute_tx(&mut self, call: &TxCall) -> Result<TxTrace, VmError> {
        let inst = self.contracts.get(&call.to).ok_or_else(|| VmError::NoCode(fmt_addr(&call.to)))?;
        let decl = self.unit.contract(&inst.contract).expect("instances refer to unit contracts");
        let f = decl
            .function(&call.function)
            .ok_or_else(|| VmError::UnknownFunction { contract: decl.name.clone(), function: call.function.clone() })?;
        if f.visibility != Visibility::Public {
            return Err(VmError::NotPublic(call.function.clone()));
        }
        if f.params.len() != call.args.len() {
            return Err(VmError::Arity { function: f.name.clone(), expected: f.params.len(), found: call.args.len() });
        }
        let snap = self.snapshot();
        let mut exec = Exec::new(self, call.sender.clone());
        let res = exec.call_public(&call.sender, &call.to, &call.function, call.args.clone(), &call.value, false);
        let Exec { mut events, steps, .. } = exec;
        match res {
            Ok(ret) => events.push(Event::Success { ret }),
            Err(h) => {
                self.restore(snap);
                mark_rolled_back(&mut events, 0);
                events.push(Event::Revert { reason: h.reason().to_string() });
            }
        }
        self.step_count += steps;
        self.tx_index += 1;
        Ok(TxTrace { events, steps })
    }
}

fn mark_rolled_back(events: &mut [Event], from: usize) {
    for e in &mut events[from..] {
        if let Event::StorageWrite { rolled_back, .. } = e {
            *rolled_back = true;
        }
    }
}

/// Why execution stopped early.
#[derive(Debug, Clone, PartialEq, Eq)]
enum Halt {
    /// Normal revert; a low-level call or delegatecall catches it.
    Revert(String),
    /// Reverts the whole transaction regardless of callers.
    Fatal(String),
}

impl Halt {
    fn reason(&self) -> &str {
        match self {
            Halt::Revert(r) | Halt::Fatal(r) => r,
        }
    }
}

impl From<ArithError> for Halt {
    fn from(e: ArithError) -> Self {
        Halt::Revert(e.to_string())
    }
}

enum Flow {
    Normal,
    Return(Option<Value>),
}

/// Storage location of an lvalue.
enum Place {
    Local(String),
    State { var: String, keys: Vec<BigInt> },
}

struct Frame {
    /// Contract whose code runs.
    code: String,
    /// Storage context and `this` address.
    this: Address,
    sender: Address,
    value: BigInt,
    scopes: Vec<BTreeMap<String, (TypeExpr, Value)>>,
}

impl Frame {
    fn local(&self, name: &str) -> Option<&(TypeExpr, Value)> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn local_mut(&mut self, name: &str) -> Option<&mut (TypeExpr, Value)> {
        self.scopes.iter_mut().rev().find_map(|s| s.get_mut(name))
    }
}

struct Exec<'w> {
    world: &'w mut World,
    unit: Arc<SourceUnit>,
    events: Vec<Event>,
    steps: u64,
    depth: usize,
    reaction_depth: u32,
    incoming: u32,
    tx_sender: Address,
}

fn void() -> Value {
    Value::Bool(false)
}

impl<'w> Exec<'w> {
    fn new(world: &'w mut World, tx_sender: Address) -> Self {
        let unit = world.unit.clone();
        Exec { world, unit, events: Vec::new(), steps: 0, depth: 0, reaction_depth: 0, incoming: 0, tx_sender }
    }

    fn tick(&mut self) -> Result<(), Halt> {
        self.steps += 1;
        if self.steps > MAX_STEPS {
            return Err(Halt::Fatal("step limit exceeded".into()));
        }
        Ok(())
    }

    fn contract(&self, name: &str) -> Option<&ContractDecl> {
        self.unit.contract(name)
    }

    fn move_value(&mut self, from: &Address, to: &Address, amount: &BigInt) -> Result<(), Halt> {
        if amount.is_zero() {
            return Ok(());
        }
        let have = self.world.balance(from);
        if &have < amount {
            return Err(Halt::Revert(format!("insufficient balance in {}", fmt_addr(from))));
        }
        self.world.balances.insert(from.clone(), have - amount);
        *self.world.balances.entry(to.clone()).or_default() += amount;
        Ok(())
    }

    fn is_adversary(&self, a: &Address) -> bool {
        self.world.adversary.as_ref().is_some_and(|adv| &adv.address == a)
    }

    fn deploy(
        &mut self,
        contract: &str,
        address: Option<Address>,
        args: Vec<Value>,
        sender: Address,
        value: BigInt,
    ) -> Result<Address, Halt> {
        let unit = self.unit.clone();
        let decl = unit.contract(contract).ok_or_else(|| Halt::Revert(format!("unknown contract {contract}")))?;
        if decl.is_abstract {
            return Err(Halt::Revert(format!("cannot deploy abstract contract {contract}")));
        }
        let addr = match address {
            Some(a) => a,
            None => {
                while self.world.contracts.contains_key(&self.world.next_address) {
                    self.world.next_address += 1u32;
                }
                let a = self.world.next_address.clone();
                self.world.next_address += 1u32;
                a
            }
        };
        self.world.contracts.insert(addr.clone(), Instance { contract: contract.to_string(), storage: Storage::default() });
        self.move_value(&sender, &addr, &value)?;
        let mut frame = Frame {
            code: contract.to_string(),
            this: addr.clone(),
            sender: sender.clone(),
            value: value.clone(),
            scopes: vec![],
        };
        for v in &decl.state_vars {
            if let Some(init) = &v.init {
                let val = self.eval(&mut frame, init)?;
                self.write(&mut frame, Place::State { var: v.name.clone(), keys: vec![] }, &v.ty, val);
            }
        }
        if let Some(ctor) = &decl.constructor {
            self.invoke(contract, addr.clone(), ctor, sender, value, args)?;
        }
        Ok(addr)
    }

    /// Entry into a public function from outside the contract.
    fn call_public(
        &mut self,
        sender: &Address,
        to: &Address,
        function: &str,
        args: Vec<Value>,
        value: &BigInt,
        record: bool,
    ) -> Result<Option<Value>, Halt> {
        if record {
            self.events.push(Event::ExternalCall {
                from: fmt_addr(sender),
                to: fmt_addr(to),
                func: Some(function.to_string()),
                value: value.to_string(),
            });
        }
        let Some(inst) = self.world.contracts.get(to) else {
            return Err(Halt::Revert(format!("no contract at {}", fmt_addr(to))));
        };
        let code = inst.contract.clone();
        let unit = self.unit.clone();
        let f = unit
            .contract(&code)
            .and_then(|c| c.function(function))
            .filter(|f| f.visibility == Visibility::Public)
            .ok_or_else(|| Halt::Revert(format!("{code} has no public function {function}")))?;
        if f.params.len() != args.len() {
            return Err(Halt::Revert(format!("{function}: wrong number of arguments")));
        }
        self.move_value(sender, to, value)?;
        self.invoke(&code, to.clone(), f, sender.clone(), value.clone(), args)
    }

    fn invoke(
        &mut self,
        code: &str,
        this: Address,
        f: &FunctionDecl,
        sender: Address,
        value: BigInt,
        args: Vec<Value>,
    ) -> Result<Option<Value>, Halt> {
        let Some(body) = &f.body else {
            return Err(Halt::Revert(format!("{} has no body", f.name)));
        };
        if self.depth >= MAX_CALL_DEPTH {
            return Err(Halt::Fatal("call depth exceeded".into()));
        }
        self.depth += 1;
        let mut params = BTreeMap::new();
        for (p, a) in f.params.iter().zip(args) {
            params.insert(p.name.clone(), (p.ty.clone(), a.coerce(&p.ty)));
        }
        let mut frame = Frame { code: code.to_string(), this, sender, value, scopes: vec![params] };
        let res = self.exec_block(&mut frame, body);
        self.depth -= 1;
        let ret = match res? {
            Flow::Return(v) => v,
            Flow::Normal => None,
        };
        Ok(f.returns.as_ref().map(|t| ret.unwrap_or_else(|| Value::default_for(t)).coerce(t)))
    }

    fn exec_block(&mut self, fr: &mut Frame, b: &Block) -> Result<Flow, Halt> {
        fr.scopes.push(BTreeMap::new());
        let mut flow = Ok(Flow::Normal);
        for s in &b.stmts {
            match self.exec_stmt(fr, s) {
                Ok(Flow::Normal) => {}
                other => {
                    flow = other;
                    break;
                }
            }
        }
        fr.scopes.pop();
        flow
    }

    fn cond(&mut self, fr: &mut Frame, e: &Expr) -> Result<bool, Halt> {
        let v = self.eval(fr, e)?;
        v.as_bool().ok_or_else(|| Halt::Revert(format!("condition is not a bool: {v:?}")))
    }

    fn exec_stmt(&mut self, fr: &mut Frame, s: &Stmt) -> Result<Flow, Halt> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl(v) => {
                let val = match &v.init {
                    Some(e) => self.eval(fr, e)?.coerce(&v.ty),
                    None => Value::default_for(&v.ty),
                };
                fr.scopes.last_mut().expect("statements run inside a scope").insert(v.name.clone(), (v.ty.clone(), val));
            }
            StmtKind::Assign { lhs, op, rhs } => {
                let r = self.eval(fr, rhs)?;
                let (place, ty) = self.place(fr, lhs)?;
                let new = match op {
                    AssignOp::Assign => r,
                    AssignOp::AddAssign => value::binary(BinOp::Add, &self.read(fr, &place, &ty), &r)?,
                    AssignOp::SubAssign => value::binary(BinOp::Sub, &self.read(fr, &place, &ty), &r)?,
                };
                self.write(fr, place, &ty, new);
            }
            StmtKind::Expr(e) => {
                self.eval(fr, e)?;
            }
            StmtKind::If { cond, then_block, else_block } => {
                if self.cond(fr, cond)? {
                    return self.exec_block(fr, then_block);
                } else if let Some(b) = else_block {
                    return self.exec_block(fr, b);
                }
            }
            StmtKind::While { cond, body } => {
                let mut first = true;
                loop {
                    if !std::mem::take(&mut first) {
                        self.tick()?;
                    }
                    if !self.cond(fr, cond)? {
                        break;
                    }
                    if let Flow::Return(v) = self.exec_block(fr, body)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            StmtKind::For { init, cond, step, body } => {
                fr.scopes.push(BTreeMap::new());
                let res = self.exec_for(fr, init.as_deref(), cond.as_ref(), step.as_deref(), body);
                fr.scopes.pop();
                return res;
            }
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.eval(fr, e)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
            StmtKind::Require { cond, msg } => {
                if !self.cond(fr, cond)? {
                    return Err(Halt::Revert(msg.clone().unwrap_or_else(|| "require failed".into())));
                }
            }
            StmtKind::Assert(cond) => {
                if !self.cond(fr, cond)? {
                    return Err(Halt::Revert("assert failed".into()));
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn exec_for(
        &mut self,
        fr: &mut Frame,
        init: Option<&Stmt>,
        cond: Option<&Expr>,
        step: Option<&Stmt>,
        body: &Block,
    ) -> Result<Flow, Halt> {
        if let Some(s) = init {
            self.exec_stmt(fr, s)?;
        }
        let mut first = true;
        loop {
            if !std::mem::take(&mut first) {
                self.tick()?;
            }
            if let Some(c) = cond {
                if !self.cond(fr, c)? {
                    return Ok(Flow::Normal);
                }
            }
            if let Flow::Return(v) = self.exec_block(fr, body)? {
                return Ok(Flow::Return(v));
            }
            if let Some(s) = step {
                self.exec_stmt(fr, s)?;
            }
        }
    }

    fn state_type(&self, code: &str, var: &str) -> Option<TypeExpr> {
        self.contract(code)?.state_var(var).map(|v| v.ty.clone())
    }

    fn place(&mut self, fr: &mut Frame, e: &Expr) -> Result<(Place, TypeExpr), Halt> {
        match &e.kind {
            ExprKind::Ident(name) => {
                if let Some((ty, _)) = fr.local(name) {
                    return Ok((Place::Local(name.clone()), ty.clone()));
                }
                let ty = self.state_type(&fr.code, name).ok_or_else(|| Halt::Revert(format!("unknown variable {name}")))?;
                Ok((Place::State { var: name.clone(), keys: vec![] }, ty))
            }
            ExprKind::Index { base, key } => {
                let (place, ty) = self.place(fr, base)?;
                let k = self.eval(fr, key)?;
                let TypeExpr::Mapping(kt, vt) = ty else {
                    return Err(Halt::Revert(format!("cannot index {ty}")));
                };
                let k = k.coerce(&kt).key();
                match place {
                    Place::State { var, mut keys } => {
                        keys.push(k);
                        Ok((Place::State { var, keys }, *vt))
                    }
                    Place::Local(n) => Err(Halt::Revert(format!("local mapping {n}"))),
                }
            }
            _ => Err(Halt::Revert("expression is not assignable".into())),
        }
    }

    fn read(&self, fr: &Frame, place: &Place, ty: &TypeExpr) -> Value {
        match place {
            Place::Local(n) => fr.local(n).map(|(_, v)| v.clone()).unwrap_or_else(|| Value::default_for(ty)),
            Place::State { var, keys } => self
                .world
                .contracts
                .get(&fr.this)
                .and_then(|i| i.storage.get(var, keys))
                .cloned()
                .unwrap_or_else(|| Value::default_for(ty)),
        }
    }

    fn write(&mut self, fr: &mut Frame, place: Place, ty: &TypeExpr, v: Value) {
        let new = v.coerce(ty);
        match place {
            Place::Local(n) => {
                if let Some(slot) = fr.local_mut(&n) {
                    slot.1 = new;
                }
            }
            Place::State { var, keys } => {
                let old = self.read(fr, &Place::State { var: var.clone(), keys: keys.clone() }, ty);
                self.events.push(Event::StorageWrite {
                    addr: fmt_addr(&fr.this),
                    var: var.clone(),
                    key: keys.iter().map(BigInt::to_string).collect(),
                    old,
                    new: new.clone(),
                    rolled_back: false,
                });
                let inst = self.world.contracts.get_mut(&fr.this).expect("frames run on deployed instances");
                inst.storage.set(&var, keys, new);
            }
        }
    }

    fn addr(&mut self, fr: &mut Frame, e: &Expr) -> Result<Address, Halt> {
        let v = self.eval(fr, e)?;
        match v {
            Value::Addr(a) => Ok(a),
            other => Err(Halt::Revert(format!("not an address: {other:?}"))),
        }
    }

    fn amount(&mut self, fr: &mut Frame, e: Option<&Expr>) -> Result<BigInt, Halt> {
        match e {
            Some(e) => {
                let v = self.eval(fr, e)?;
                v.as_int().cloned().ok_or_else(|| Halt::Revert(format!("not an amount: {v:?}")))
            }
            None => Ok(BigInt::zero()),
        }
    }

    /// Static contract type of an address-valued expression, when known.
    fn static_contract(&self, fr: &Frame, e: &Expr) -> Option<String> {
        let ty = match &e.kind {
            ExprKind::Ident(n) => fr.local(n).map(|(t, _)| t.clone()).or_else(|| self.state_type(&fr.code, n)),
            ExprKind::New { contract, .. } => return Some(contract.clone()),
            ExprKind::Index { base, .. } => {
                let mut b = base.as_ref();
                let mut depth = 1;
                while let ExprKind::Index { base, .. } = &b.kind {
                    b = base;
                    depth += 1;
                }
                let ExprKind::Ident(n) = &b.kind else { return None };
                let mut t = self.state_type(&fr.code, n)?;
                for _ in 0..depth {
                    let TypeExpr::Mapping(_, v) = t else { return None };
                    t = *v;
                }
                Some(t)
            }
            _ => None,
        };
        match ty {
            Some(TypeExpr::ContractRef(c)) => Some(c),
            _ => None,
        }
    }

    fn fallback_of(&self, a: &Address) -> Option<(String, FunctionDecl)> {
        let inst = self.world.contracts.get(a)?;
        let f = self.contract(&inst.contract)?.functions.iter().find(|f| f.is_fallback() && f.body.is_some())?;
        Some((inst.contract.clone(), f.clone()))
    }

    /// Runs the adversary's reaction to its next incoming call, if any.
    fn react(&mut self) -> Result<(), Halt> {
        let Some(adv) = self.world.adversary.clone() else { return Ok(()) };
        self.incoming += 1;
        let n = self.incoming;
        let tx = self.world.tx_index;
        let Some(reaction) = adv.reactions.iter().find(|r| r.on == n && r.tx.is_none_or(|t| t == tx)) else {
            return Ok(());
        };
        if self.reaction_depth >= adv.max_depth {
            return Err(Halt::Fatal("adversary depth exhausted".into()));
        }
        self.reaction_depth += 1;
        let mut res = Ok(());
        for c in &reaction.calls {
            if let Err(h) = self.call_public(&adv.address, &c.to, &c.function, c.args.clone(), &c.value, true) {
                // an attacking sender gives up on the whole transaction once its re-entry fails
                res = Err(match h {
                    Halt::Revert(r) if self.tx_sender == adv.address => Halt::Fatal(format!("attack aborted: {r}")),
                    other => other,
                });
                break;
            }
        }
        self.reaction_depth -= 1;
        res
    }

    /// Runs `body` and undoes its effects if it reverts; fatal halts still propagate.
    fn catching(&mut self, body: impl FnOnce(&mut Self) -> Result<(), Halt>) -> Result<bool, Halt> {
        let snap = self.world.snapshot();
        let mark = self.events.len();
        match body(self) {
            Ok(()) => Ok(true),
            Err(Halt::Revert(_)) => {
                self.world.restore(snap);
                mark_rolled_back(&mut self.events, mark);
                Ok(false)
            }
            Err(fatal) => Err(fatal),
        }
    }

    fn eval_args(&mut self, fr: &mut Frame, args: &[Expr]) -> Result<Vec<Value>, Halt> {
        args.iter().map(|a| self.eval(fr, a)).collect()
    }

    fn eval(&mut self, fr: &mut Frame, e: &Expr) -> Result<Value, Halt> {
        match &e.kind {
            ExprKind::Literal(l) => Ok(Value::from_literal(l)),
            ExprKind::Ident(_) | ExprKind::Index { .. } => {
                let (place, ty) = self.place(fr, e)?;
                if ty.is_mapping() {
                    return Err(Halt::Revert("mapping used as a value".into()));
                }
                Ok(self.read(fr, &place, &ty))
            }
            ExprKind::Member { base, field } => {
                let a = self.addr(fr, base)?;
                match field.as_str() {
                    "balance" => Ok(Value::uint256(self.world.balance(&a))),
                    other => Err(Halt::Revert(format!("unknown member {other}"))),
                }
            }
            ExprKind::Binary { op: op @ (BinOp::And | BinOp::Or), lhs, rhs } => {
                let l = self.cond(fr, lhs)?;
                if l == (*op == BinOp::Or) {
                    return Ok(Value::Bool(l));
                }
                Ok(Value::Bool(self.cond(fr, rhs)?))
            }
            ExprKind::Binary { op, lhs, rhs } => {
                let l = self.eval(fr, lhs)?;
                let r = self.eval(fr, rhs)?;
                Ok(value::binary(*op, &l, &r)?)
            }
            ExprKind::Unary { op: op @ (UnOp::PostInc | UnOp::PostDec), operand } => {
                let (place, ty) = self.place(fr, operand)?;
                let old = self.read(fr, &place, &ty);
                let new = value::unary(*op, &old)?;
                self.write(fr, place, &ty, new);
                Ok(old)
            }
            ExprKind::Unary { op, operand } => {
                let v = self.eval(fr, operand)?;
                Ok(value::unary(*op, &v)?)
            }
            ExprKind::Cast { target, operand } => {
                let v = self.eval(fr, operand)?;
                Ok(value::cast(target, &v)?)
            }
            ExprKind::CallInternal { name, args } => {
                let args = self.eval_args(fr, args)?;
                let unit = self.unit.clone();
                let f = unit
                    .contract(&fr.code)
                    .and_then(|c| c.function(name))
                    .ok_or_else(|| Halt::Revert(format!("unknown function {name}")))?;
                let ret = self.invoke(&fr.code, fr.this.clone(), f, fr.sender.clone(), fr.value.clone(), args)?;
                Ok(ret.unwrap_or_else(void))
            }
            ExprKind::CallExternal { target, name, args, value } => {
                let to = self.addr(fr, target)?;
                let args = self.eval_args(fr, args)?;
                let amount = self.amount(fr, value.as_deref())?;
                if self.world.contracts.contains_key(&to) {
                    let ret = self.call_public(&fr.this.clone(), &to, name, args, &amount, true)?;
                    return Ok(ret.unwrap_or_else(void));
                }
                self.events.push(Event::ExternalCall {
                    from: fmt_addr(&fr.this),
                    to: fmt_addr(&to),
                    func: Some(name.clone()),
                    value: amount.to_string(),
                });
                if !self.is_adversary(&to) {
                    return Err(Halt::Revert(format!("call to non-contract {}", fmt_addr(&to))));
                }
                self.move_value(&fr.this.clone(), &to, &amount)?;
                self.react()?;
                let returns = self
                    .static_contract(fr, target)
                    .and_then(|c| self.unit.contract(&c).and_then(|d| d.function(name)).map(|f| f.returns.clone()))
                    .flatten();
                Ok(returns.map_or_else(void, |t| Value::default_for(&t)))
            }
            ExprKind::LowLevelCall { target, value } => {
                let to = self.addr(fr, target)?;
                let amount = self.amount(fr, value.as_deref())?;
                let this = fr.this.clone();
                self.events.push(Event::ExternalCall {
                    from: fmt_addr(&this),
                    to: fmt_addr(&to),
                    func: None,
                    value: amount.to_string(),
                });
                let ok = self.catching(|x| {
                    x.move_value(&this, &to, &amount)?;
                    if let Some((code, f)) = x.fallback_of(&to) {
                        x.invoke(&code, to.clone(), &f, this.clone(), amount.clone(), vec![])?;
                    } else if x.is_adversary(&to) {
                        x.react()?;
                    }
                    Ok(())
                })?;
                Ok(Value::Bool(ok))
            }
            ExprKind::Transfer { target, amount } => {
                let to = self.addr(fr, target)?;
                let amount = self.amount(fr, Some(amount))?;
                let this = fr.this.clone();
                self.move_value(&this, &to, &amount)?;
                self.events.push(Event::ValueTransfer { from: fmt_addr(&this), to: fmt_addr(&to), amount: amount.to_string() });
                if let Some((code, f)) = self.fallback_of(&to) {
                    self.invoke(&code, to.clone(), &f, this, amount, vec![])?;
                } else if self.is_adversary(&to) {
                    self.react()?;
                }
                Ok(void())
            }
            ExprKind::DelegateCall { target, args } => {
                let to = self.addr(fr, target)?;
                self.eval_args(fr, args)?;
                let (this, sender, value) = (fr.this.clone(), fr.sender.clone(), fr.value.clone());
                self.events.push(Event::ExternalCall {
                    from: fmt_addr(&this),
                    to: fmt_addr(&to),
                    func: Some("delegatecall".into()),
                    value: "0".into(),
                });
                let ok = self.catching(|x| {
                    if let Some((code, f)) = x.fallback_of(&to) {
                        // the callee's code runs against the caller's storage
                        x.invoke(&code, this, &f, sender, value, vec![])?;
                    } else if x.is_adversary(&to) {
                        x.react()?;
                    }
                    Ok(())
                })?;
                Ok(Value::Bool(ok))
            }
            ExprKind::New { contract, args } => {
                let args = self.eval_args(fr, args)?;
                let this = fr.this.clone();
                let addr = self.deploy(contract, None, args, this.clone(), BigInt::zero())?;
                self.events.push(Event::ExternalCall {
                    from: fmt_addr(&this),
                    to: fmt_addr(&addr),
                    func: Some("constructor".into()),
                    value: "0".into(),
                });
                Ok(Value::Addr(addr))
            }
            ExprKind::MsgSender => Ok(Value::Addr(fr.sender.clone())),
            ExprKind::MsgValue => Ok(Value::uint256(fr.value.clone())),
        }
    }
}

/// Parses a decimal or `0x` hex address.
pub fn parse_address(s: &str) -> Option<Address> {
    match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => BigUint::parse_bytes(hex.as_bytes(), 16),
        None => BigUint::parse_bytes(s.as_bytes(), 10),
    }
}

/// Address as a mapping key, for reading balances stored under `msg.sender`.
pub fn address_key(a: &Address) -> BigInt {
    BigInt::from_biguint(Sign::Plus, a.clone())
}

fn type_of(v: &Value) -> TypeExpr {
    match v {
        Value::Int(_, t) => t.as_type(),
        Value::Lit(_) => TypeExpr::UInt(256),
        Value::Bool(_) => TypeExpr::Bool,
        Value::Addr(_) => TypeExpr::Address,
    }
}

/// Evaluates an expression over local bindings with exactly the interpreter's semantics.
/// Errors carry the revert reason.
pub fn eval_pure(expr: &Expr, env: &BTreeMap<String, Value>) -> Result<Value, String> {
    let unit = SourceUnit { source_name: String::new(), pragma_text: String::new(), contracts: vec![] };
    let mut world = World::new(unit);
    let mut exec = Exec::new(&mut world, BigUint::zero());
    let scope = env.iter().map(|(k, v)| (k.clone(), (type_of(v), v.clone()))).collect();
    let mut frame =
        Frame { code: String::new(), this: BigUint::zero(), sender: BigUint::zero(), value: BigInt::zero(), scopes: vec![scope] };
    exec.eval(&mut frame, expr).map_err(|h| h.reason().to_string())
}
