//! Scenario files: deployments, an adversary script and a tagged transaction sequence.
//!
//! ```toml
//! [accounts]
//! "0x10" = 100
//!
//! [[deploy]]
//! contract = "Vulnerable"
//! address = "0x100"
//!
//! [adversary]
//! address = "0xa0"
//! max_depth = 4
//! [[adversary.reactions]]
//! on = 1
//! calls = [{ fn = "removeAccount", to = "0x100" }]
//!
//! [[tx]]
//! sender = "0xa0"
//! to = "0x100"
//! fn = "removeAccount"
//! tag = "attack"
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use num_bigint::{BigInt, BigUint};
use num_traits::{Num, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frontend::ast::TypeExpr;

use super::value::Value;
use super::world::{parse_address, Address};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed scenario: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("cannot read scenario: {0}")]
    Io(#[from] std::io::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Tag {
    #[default]
    Benign,
    Attack,
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tag::Benign => "benign",
            Tag::Attack => "attack",
        })
    }
}

/// Argument as written in the scenario; converted against the callee's parameter types.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Arg {
    Bool(bool),
    Int(i64),
    Text(String),
}

impl From<i64> for Arg {
    fn from(v: i64) -> Self {
        Arg::Int(v)
    }
}

impl From<bool> for Arg {
    fn from(v: bool) -> Self {
        Arg::Bool(v)
    }
}

impl From<&str> for Arg {
    fn from(v: &str) -> Self {
        Arg::Text(v.to_string())
    }
}

fn parse_int(s: &str) -> Option<BigInt> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s),
    };
    let v = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
        Some(hex) => BigInt::from_str_radix(hex, 16).ok()?,
        None => BigInt::from_str_radix(body, 10).ok()?,
    };
    Some(if neg { -v } else { v })
}

impl Arg {
    /// Converts to a runtime value of type `ty`.
    pub fn to_value(&self, ty: &TypeExpr) -> Result<Value, ScenarioError> {
        let bad = || invalid(format!("argument {self:?} does not fit {ty}"));
        match ty {
            TypeExpr::Bool => match self {
                Arg::Bool(b) => Ok(Value::Bool(*b)),
                _ => Err(bad()),
            },
            TypeExpr::Address | TypeExpr::ContractRef(_) => match self {
                Arg::Int(v) if *v >= 0 => Ok(Value::Addr(BigUint::from(*v as u64))),
                Arg::Text(s) => parse_address(s).map(Value::Addr).ok_or_else(bad),
                _ => Err(bad()),
            },
            TypeExpr::UInt(_) | TypeExpr::Int(_) => {
                let it = ty.int_type().expect("integer type");
                let v = match self {
                    Arg::Int(v) => BigInt::from(*v),
                    Arg::Text(s) => parse_int(s).ok_or_else(bad)?,
                    Arg::Bool(_) => return Err(bad()),
                };
                if !it.contains(&v) {
                    return Err(bad());
                }
                Ok(Value::Int(v, it))
            }
            TypeExpr::Mapping(..) => Err(bad()),
        }
    }

    fn amount(&self) -> Result<BigInt, ScenarioError> {
        let v = match self {
            Arg::Int(v) => BigInt::from(*v),
            Arg::Text(s) => parse_int(s).ok_or_else(|| invalid(format!("bad amount {s:?}")))?,
            Arg::Bool(_) => return Err(invalid("amount must be a number")),
        };
        if v < BigInt::zero() {
            return Err(invalid("amount must not be negative"));
        }
        Ok(v)
    }

    fn address(&self) -> Result<Address, ScenarioError> {
        match self.to_value(&TypeExpr::Address)? {
            Value::Addr(a) => Ok(a),
            _ => unreachable!("address conversion yields addresses"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct RawCall {
    #[serde(rename = "fn")]
    function: String,
    to: Arg,
    #[serde(default)]
    args: Vec<Arg>,
    value: Option<Arg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
struct RawReaction {
    on: u32,
    tx: Option<usize>,
    #[serde(default)]
    calls: Vec<RawCall>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAdversary {
    address: Arg,
    balance: Option<Arg>,
    #[serde(default = "default_depth")]
    max_depth: u32,
    #[serde(default)]
    reactions: Vec<RawReaction>,
}

fn default_depth() -> u32 {
    8
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDeploy {
    contract: String,
    address: Arg,
    balance: Option<Arg>,
    #[serde(default)]
    args: Vec<Arg>,
    sender: Option<Arg>,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTx {
    sender: Arg,
    to: Arg,
    #[serde(rename = "fn")]
    function: String,
    #[serde(default)]
    args: Vec<Arg>,
    value: Option<Arg>,
    #[serde(default)]
    tag: Tag,
}

#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    accounts: BTreeMap<String, Arg>,
    #[serde(default)]
    deploy: Vec<RawDeploy>,
    adversary: Option<RawAdversary>,
    #[serde(default)]
    tx: Vec<RawTx>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Deployment {
    pub contract: String,
    pub address: Address,
    pub balance: BigInt,
    pub args: Vec<Arg>,
    pub sender: Address,
}

/// Adversary call before argument conversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSpec {
    pub function: String,
    pub to: Address,
    pub args: Vec<Arg>,
    pub value: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReactionSpec {
    pub on: u32,
    pub tx: Option<usize>,
    pub calls: Vec<CallSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdversarySpec {
    pub address: Address,
    pub balance: BigInt,
    pub max_depth: u32,
    pub reactions: Vec<ReactionSpec>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxSpec {
    pub sender: Address,
    pub to: Address,
    pub function: String,
    pub args: Vec<Arg>,
    pub value: BigInt,
    pub tag: Tag,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Scenario {
    pub accounts: BTreeMap<Address, BigInt>,
    pub deployments: Vec<Deployment>,
    pub adversary: Option<AdversarySpec>,
    pub txs: Vec<TxSpec>,
}

/// Default deployer when a deployment names none.
pub const DEFAULT_DEPLOYER: u32 = 0xd0;

fn amount_or_zero(a: Option<&Arg>) -> Result<BigInt, ScenarioError> {
    a.map_or(Ok(BigInt::zero()), Arg::amount)
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Scenario, ScenarioError> {
        let raw: RawScenario = toml::from_str(text)?;
        let mut accounts = BTreeMap::new();
        for (k, v) in &raw.accounts {
            let a = parse_address(k).ok_or_else(|| invalid(format!("bad account address {k:?}")))?;
            accounts.insert(a, v.amount()?);
        }
        let deployments = raw
            .deploy
            .iter()
            .map(|d| {
                Ok(Deployment {
                    contract: d.contract.clone(),
                    address: d.address.address()?,
                    balance: amount_or_zero(d.balance.as_ref())?,
                    args: d.args.clone(),
                    sender: d.sender.as_ref().map_or(Ok(BigUint::from(DEFAULT_DEPLOYER)), Arg::address)?,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        let adversary = match &raw.adversary {
            None => None,
            Some(a) => {
                if a.max_depth == 0 {
                    return Err(invalid("adversary max_depth must be at least 1"));
                }
                let mut reactions = Vec::new();
                for r in &a.reactions {
                    if r.on == 0 {
                        return Err(invalid("reaction index `on` starts at 1"));
                    }
                    let calls = r
                        .calls
                        .iter()
                        .map(|c| {
                            Ok(CallSpec {
                                function: c.function.clone(),
                                to: c.to.address()?,
                                args: c.args.clone(),
                                value: amount_or_zero(c.value.as_ref())?,
                            })
                        })
                        .collect::<Result<Vec<_>, ScenarioError>>()?;
                    reactions.push(ReactionSpec { on: r.on, tx: r.tx, calls });
                }
                Some(AdversarySpec {
                    address: a.address.address()?,
                    balance: amount_or_zero(a.balance.as_ref())?,
                    max_depth: a.max_depth,
                    reactions,
                })
            }
        };
        let txs = raw
            .tx
            .iter()
            .map(|t| {
                Ok(TxSpec {
                    sender: t.sender.address()?,
                    to: t.to.address()?,
                    function: t.function.clone(),
                    args: t.args.clone(),
                    value: amount_or_zero(t.value.as_ref())?,
                    tag: t.tag,
                })
            })
            .collect::<Result<Vec<_>, ScenarioError>>()?;
        Ok(Scenario { accounts, deployments, adversary, txs })
    }

    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        Scenario::from_toml(&std::fs::read_to_string(path)?)
    }
}
