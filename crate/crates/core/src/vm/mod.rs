//! Deterministic interpreter with a scripted adversary, trace recording and
//! differential replay of original against hardened code.

pub mod diff;
pub mod oracle;
pub mod scenario;
pub mod value;
pub mod world;

use thiserror::Error;

pub use diff::{classify, comparable_events, run_scenario, run_world, setup_world, Classification, DiffReport, TxDiff};
pub use oracle::{wide_oracle, OracleError, WideResult};
pub use scenario::{Arg, Scenario, ScenarioError, Tag};
pub use value::Value;
pub use world::{eval_pure, Address, AdversaryScript, Event, Reaction, TxCall, TxTrace, World};

/// Host-level failures: the requested call cannot be made at all.
#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum VmError {
    #[error("unknown contract `{0}`")]
    UnknownContract(String),
    #[error("contract `{contract}` has no function `{function}`")]
    UnknownFunction { contract: String, function: String },
    #[error("function `{0}` is not public")]
    NotPublic(String),
    #[error("`{function}` expects {expected} arguments, got {found}")]
    Arity { function: String, expected: usize, found: usize },
    #[error("no contract at {0}")]
    NoCode(String),
    #[error("address {0} is already in use")]
    AddressInUse(String),
    #[error("deploying `{contract}` reverted: {reason}")]
    DeployReverted { contract: String, reason: String },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse;
    use num_bigint::{BigInt, BigUint};

    const VULNERABLE: &str = "contract Vulnerable {
  mapping (address => uint) balance;
  function deposit() payable {
    if(msg.value > 0) {
      balance[msg.sender] += msg.value;
    }
  }
  function withdraw(uint amount) public {
    if (balance[msg.sender] >= amount) {
      balance[msg.sender] -= amount;
      msg.sender.transfer(amount);
    }
  }
  function removeAccount() public {
    uint amount = balance[msg.sender];
    if(amount > 0) {
      msg.sender.call.value(amount)(\"\");
      balance[msg.sender] = 0;
    }
  }
}";

    fn world() -> (World, Address, Address) {
        let mut w = World::new(parse(VULNERABLE, "v").unwrap());
        let user = BigUint::from(0x10u32);
        w.set_balance(user.clone(), BigInt::from(100));
        let v = w.deploy("Vulnerable", Some(BigUint::from(0x100u32)), BigInt::from(0), vec![], user.clone()).unwrap();
        (w, v, user)
    }

    fn tx(user: &Address, to: &Address, f: &str, args: Vec<Value>, value: i64) -> TxCall {
        TxCall { sender: user.clone(), to: to.clone(), function: f.into(), args, value: BigInt::from(value) }
    }

    #[test]
    fn deposit_writes_balance() {
        let (mut w, v, user) = world();
        let t = w.execute_tx(&tx(&user, &v, "deposit", vec![], 5)).unwrap();
        let Event::StorageWrite { var, old, new, .. } = &t.events[0] else { panic!("{:?}", t.events) };
        assert_eq!((var.as_str(), old.to_string(), new.to_string()), ("balance", "0".into(), "5".into()));
        assert_eq!(t.events[1], Event::Success { ret: None });
        assert_eq!(w.balance(&v), BigInt::from(5));
    }

    #[test]
    fn withdraw_above_balance_does_nothing() {
        let (mut w, v, user) = world();
        w.execute_tx(&tx(&user, &v, "deposit", vec![], 5)).unwrap();
        let t = w.execute_tx(&tx(&user, &v, "withdraw", vec![Value::uint256(10)], 0)).unwrap();
        assert_eq!(t.events, vec![Event::Success { ret: None }]);
    }

    #[test]
    fn revert_restores_the_world() {
        let src = "contract C { uint x; function f() public { x = 7; require(false, \"no\"); } }";
        let mut w = World::new(parse(src, "c").unwrap());
        let c = w.deploy("C", None, BigInt::from(0), vec![], BigUint::from(1u32)).unwrap();
        let before = w.clone();
        let t = w.execute_tx(&tx(&BigUint::from(1u32), &c, "f", vec![], 0)).unwrap();
        assert!(t.reverted());
        assert!(matches!(t.events[0], Event::StorageWrite { rolled_back: true, .. }));
        assert_eq!(w.contracts, before.contracts);
        assert_eq!(w.balances, before.balances);
    }

    #[test]
    fn low_level_call_swallows_callee_revert() {
        let src = "contract T { uint y; function fallback() public payable { y = 1; require(false); } }
                   contract C { uint x; function f(address t) public { t.call.value(0)(\"\"); x = 2; } }";
        let mut w = World::new(parse(src, "c").unwrap());
        let t = w.deploy("T", None, BigInt::from(0), vec![], BigUint::from(1u32)).unwrap();
        let c = w.deploy("C", None, BigInt::from(0), vec![], BigUint::from(1u32)).unwrap();
        let tr = w.execute_tx(&tx(&BigUint::from(1u32), &c, "f", vec![Value::Addr(t.clone())], 0)).unwrap();
        assert!(!tr.reverted());
        assert_eq!(w.storage_value(&t, "y", &[]).unwrap().to_string(), "0");
        assert_eq!(w.storage_value(&c, "x", &[]).unwrap().to_string(), "2");
    }

    #[test]
    fn empty_scenario_gives_empty_report() {
        let unit = parse(VULNERABLE, "v").unwrap();
        let report = run_scenario(&unit, &unit, &Scenario::default()).unwrap();
        assert!(report.is_empty());
    }

    #[test]
    fn internal_functions_are_not_transaction_targets() {
        let src = "contract C { function g() internal {} }";
        let mut w = World::new(parse(src, "c").unwrap());
        let c = w.deploy("C", None, BigInt::from(0), vec![], BigUint::from(1u32)).unwrap();
        assert_eq!(w.execute_tx(&tx(&BigUint::from(1u32), &c, "g", vec![], 0)), Err(VmError::NotPublic("g".into())));
    }
}
