//! Differential replay of a scenario on original and hardened code.

use std::fmt;

use serde::Serialize;

use crate::frontend::ast::SourceUnit;
use crate::harden::RESERVED_PREFIX;

use super::scenario::{Arg, Scenario, ScenarioError, Tag};
use super::value::Value;
use super::world::{fmt_addr, Address, AdversaryCall, AdversaryScript, Event, Reaction, TxCall, TxTrace, World};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Classification {
    Equivalent,
    Prevented,
    Broken,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Equivalent => "EQUIVALENT",
            Classification::Prevented => "PREVENTED",
            Classification::Broken => "BROKEN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TxDiff {
    pub index: usize,
    pub tag: Tag,
    pub function: String,
    pub classification: Classification,
    pub steps_orig: u64,
    pub steps_hard: u64,
    #[serde(skip)]
    pub original: TxTrace,
    #[serde(skip)]
    pub hardened: TxTrace,
}

impl TxDiff {
    /// Extra steps the hardened code spent on this transaction.
    pub fn overhead(&self) -> i64 {
        self.steps_hard as i64 - self.steps_orig as i64
    }

    /// `<index> <tag> <classification> steps_orig=<n> steps_hard=<n>`
    pub fn line(&self) -> String {
        format!(
            "{} {} {} steps_orig={} steps_hard={}",
            self.index, self.tag, self.classification, self.steps_orig, self.steps_hard
        )
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DiffReport {
    pub txs: Vec<TxDiff>,
}

impl DiffReport {
    pub fn is_empty(&self) -> bool {
        self.txs.is_empty()
    }

    pub fn count(&self, c: Classification) -> usize {
        self.txs.iter().filter(|t| t.classification == c).count()
    }

    pub fn has_broken(&self) -> bool {
        self.count(Classification::Broken) > 0
    }

    pub fn summary(&self) -> String {
        let benign: Vec<&TxDiff> = self.txs.iter().filter(|t| t.tag == Tag::Benign).collect();
        let orig: u64 = benign.iter().map(|t| t.steps_orig).sum();
        let hard: u64 = benign.iter().map(|t| t.steps_hard).sum();
        format!(
            "summary: txs={} equivalent={} prevented={} broken={}\noverhead: benign_steps_orig={} benign_steps_hard={} delta={}",
            self.txs.len(),
            self.count(Classification::Equivalent),
            self.count(Classification::Prevented),
            self.count(Classification::Broken),
            orig,
            hard,
            hard as i64 - orig as i64
        )
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.txs {
            out.push_str(&t.line());
            out.push('\n');
        }
        out.push_str(&self.summary());
        out.push('\n');
        out
    }
}

fn is_patch_event(e: &Event) -> bool {
    matches!(e, Event::StorageWrite { var, .. } if var.starts_with(RESERVED_PREFIX))
}

/// Trace events with lock bookkeeping removed.
pub fn comparable_events(t: &TxTrace) -> Vec<Event> {
    t.events.iter().filter(|e| !is_patch_event(e)).cloned().collect()
}

pub fn classify(tag: Tag, original: &TxTrace, hardened: &TxTrace) -> Classification {
    match (original.reverted(), hardened.reverted()) {
        (true, true) => Classification::Equivalent,
        (false, true) if tag == Tag::Attack => Classification::Prevented,
        (false, true) | (true, false) => Classification::Broken,
        (false, false) if comparable_events(original) == comparable_events(hardened) => Classification::Equivalent,
        (false, false) => Classification::Broken,
    }
}

fn convert_args(world: &World, to: &Address, function: &str, args: &[Arg]) -> Result<Vec<Value>, ScenarioError> {
    let inst =
        world.contracts.get(to).ok_or_else(|| ScenarioError::Invalid(format!("no contract deployed at {}", fmt_addr(to))))?;
    let f = world
        .unit()
        .contract(&inst.contract)
        .and_then(|c| c.function(function))
        .ok_or_else(|| ScenarioError::Invalid(format!("{} has no function {function}", inst.contract)))?;
    if f.params.len() != args.len() {
        return Err(ScenarioError::Invalid(format!(
            "{function} takes {} arguments, scenario gives {}",
            f.params.len(),
            args.len()
        )));
    }
    f.params.iter().zip(args).map(|(p, a)| a.to_value(&p.ty)).collect()
}

/// Deploys the scenario's contracts and accounts into a fresh world.
pub fn setup_world(unit: &SourceUnit, scenario: &Scenario) -> Result<World, ScenarioError> {
    let mut world = World::new(unit.clone());
    for (a, b) in &scenario.accounts {
        world.set_balance(a.clone(), b.clone());
    }
    for d in &scenario.deployments {
        let decl =
            unit.contract(&d.contract).ok_or_else(|| ScenarioError::Invalid(format!("unknown contract {}", d.contract)))?;
        let params: Vec<_> = decl.constructor.iter().flat_map(|c| c.params.iter()).collect();
        if params.len() != d.args.len() {
            return Err(ScenarioError::Invalid(format!("constructor of {} takes {} arguments", d.contract, params.len())));
        }
        let args = params.iter().zip(&d.args).map(|(p, a)| a.to_value(&p.ty)).collect::<Result<Vec<_>, _>>()?;
        world
            .deploy(&d.contract, Some(d.address.clone()), d.balance.clone(), args, d.sender.clone())
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
    }
    if let Some(adv) = &scenario.adversary {
        let mut reactions = Vec::new();
        for r in &adv.reactions {
            let mut calls = Vec::new();
            for c in &r.calls {
                calls.push(AdversaryCall {
                    to: c.to.clone(),
                    function: c.function.clone(),
                    args: convert_args(&world, &c.to, &c.function, &c.args)?,
                    value: c.value.clone(),
                });
            }
            reactions.push(Reaction { on: r.on, tx: r.tx, calls });
        }
        *world.balances.entry(adv.address.clone()).or_default() += &adv.balance;
        world.adversary = Some(AdversaryScript { address: adv.address.clone(), reactions, max_depth: adv.max_depth });
    }
    Ok(world)
}

/// Runs every transaction of the scenario on one world.
pub fn run_world(world: &mut World, scenario: &Scenario) -> Result<Vec<TxTrace>, ScenarioError> {
    scenario
        .txs
        .iter()
        .map(|t| {
            let call = TxCall {
                sender: t.sender.clone(),
                to: t.to.clone(),
                function: t.function.clone(),
                args: convert_args(world, &t.to, &t.function, &t.args)?,
                value: t.value.clone(),
            };
            world.execute_tx(&call).map_err(|e| ScenarioError::Invalid(e.to_string()))
        })
        .collect()
}

/// Replays `scenario` on both versions and classifies every transaction.
pub fn run_scenario(original: &SourceUnit, hardened: &SourceUnit, scenario: &Scenario) -> Result<DiffReport, ScenarioError> {
    let mut w_orig = setup_world(original, scenario)?;
    let mut w_hard = setup_world(hardened, scenario)?;
    let t_orig = run_world(&mut w_orig, scenario)?;
    let t_hard = run_world(&mut w_hard, scenario)?;
    let txs = scenario
        .txs
        .iter()
        .zip(t_orig.into_iter().zip(t_hard))
        .enumerate()
        .map(|(index, (tx, (o, h)))| TxDiff {
            index,
            tag: tx.tag,
            function: tx.function.clone(),
            classification: classify(tx.tag, &o, &h),
            steps_orig: o.steps,
            steps_hard: h.steps,
            original: o,
            hardened: h,
        })
        .collect();
    Ok(DiffReport { txs })
}
