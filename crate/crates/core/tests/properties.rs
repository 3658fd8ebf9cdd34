//! Property tests for invariants that hold across the whole pipeline and interpreter.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use proptest::prelude::*;

use solharden::cpg::build_full;
use solharden::detect::IntBugKind;
use solharden::emit::{emit_unit, EmitConfig};
use solharden::enrich::enrich;
use solharden::frontend::{parse, BinOp, Expr, IntType, INT_WIDTHS};
use solharden::harden::arithmetic_check;
use solharden::pipeline::{analyze_source, harden_source, PipelineConfig};
use solharden::vm::{
    comparable_events, eval_pure, run_scenario, run_world, setup_world, wide_oracle, Classification, Scenario, Value,
};

fn pow2(bits: u16) -> BigInt {
    BigInt::one() << bits as usize
}

fn bounds(t: IntType) -> (BigInt, BigInt) {
    if t.signed {
        (-pow2(t.bits - 1), pow2(t.bits - 1) - 1)
    } else {
        (BigInt::zero(), pow2(t.bits) - 1)
    }
}

/// Two's-complement wrap computed independently of the interpreter.
fn wrap(v: &BigInt, t: IntType) -> BigInt {
    let (lo, _) = bounds(t);
    (v - &lo).mod_floor(&pow2(t.bits)) + lo
}

fn int_type() -> impl Strategy<Value = IntType> {
    (any::<bool>(), prop::sample::select(INT_WIDTHS.to_vec())).prop_map(|(s, b)| IntType::new(s, b))
}

/// A value of type `t`, biased toward the edges of its range.
fn value_in(t: IntType) -> impl Strategy<Value = BigInt> {
    let (lo, hi) = bounds(t);
    let edges = vec![lo.clone(), hi.clone(), BigInt::zero(), BigInt::one(), lo.clone() + 1, hi.clone() - 1];
    prop_oneof![
        prop::sample::select(edges),
        prop::collection::vec(any::<u8>(), 1..=32).prop_map(move |bytes| wrap(&BigInt::from_signed_bytes_le(&bytes), t)),
    ]
}

fn typed_pair() -> impl Strategy<Value = (IntType, BigInt, BigInt)> {
    int_type().prop_flat_map(|t| (Just(t), value_in(t), value_in(t)))
}

fn env(t: IntType, a: &BigInt, b: &BigInt) -> BTreeMap<String, Value> {
    BTreeMap::from([("a".to_string(), Value::Int(a.clone(), t)), ("b".to_string(), Value::Int(b.clone(), t))])
}

fn ab(op: BinOp) -> Expr {
    Expr::binary(op, Expr::ident("a"), Expr::ident("b"))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    /// Interpreter arithmetic wraps at the declared width, and the oracle agrees with it.
    #[test]
    fn arithmetic_wraps_at_declared_width((t, a, b) in typed_pair(), op in prop::sample::select(vec![BinOp::Add, BinOp::Sub, BinOp::Mul])) {
        let exact = match op {
            BinOp::Add => &a + &b,
            BinOp::Sub => &a - &b,
            _ => &a * &b,
        };
        let e = env(t, &a, &b);
        let got = eval_pure(&ab(op), &e).unwrap();
        prop_assert_eq!(&got, &Value::Int(wrap(&exact, t), t));
        let oracle = wide_oracle(&ab(op), &e).unwrap();
        prop_assert_eq!(&oracle.wrapped, &got);
        prop_assert_eq!(&oracle.exact, &exact);
        let (lo, hi) = bounds(t);
        prop_assert_eq!(oracle.overflowed, exact < lo || exact > hi);
    }

    /// Synthesized checks fail exactly on overflow at every width, not only the exhaustively swept one.
    #[test]
    fn checks_fail_exactly_on_overflow((t, a, b) in typed_pair(), kind in prop::sample::select(vec![IntBugKind::Add, IntBugKind::Sub, IntBugKind::Mul])) {
        let check = arithmetic_check(kind, t, Expr::ident("a"), Expr::ident("b"));
        let exact = match kind {
            IntBugKind::Add => &a + &b,
            IntBugKind::Sub => &a - &b,
            _ => &a * &b,
        };
        let (lo, hi) = bounds(t);
        let ok = eval_pure(&check, &env(t, &a, &b)).unwrap();
        prop_assert_eq!(ok, Value::Bool(exact >= lo && exact <= hi));
    }

    /// parse, emit, parse gives the same tree and a second emit is byte-identical.
    #[test]
    fn generated_contracts_round_trip(seed in any::<u64>()) {
        for src in [common::gen_contract(seed).source, common::gen_call_graph(seed, 12).source] {
            let first = parse(&src, "gen").unwrap();
            let text = emit_unit(&first, &EmitConfig::default());
            let second = parse(&text, "gen").unwrap();
            prop_assert!(first.structurally_eq(&second));
            prop_assert_eq!(emit_unit(&second, &EmitConfig::default()), text);
        }
    }

    /// The pipeline's own output is already in emitted form.
    #[test]
    fn hardened_output_is_an_emit_fixpoint(seed in any::<u64>(), mark in any::<bool>()) {
        let c = common::gen_contract(seed);
        let mut cfg = PipelineConfig::default();
        cfg.emit.mark_patches = mark;
        let out = harden_source(&c.source, &c.name, &cfg).unwrap();
        let text = out.hardened_source.unwrap();
        let again = emit_unit(&parse(&text, &c.name).unwrap(), &cfg.emit);
        prop_assert_eq!(again, text);
    }

    /// Hardening marked output again changes nothing.
    #[test]
    fn marked_hardening_is_idempotent(seed in any::<u64>()) {
        let c = common::gen_contract(seed);
        let mut cfg = PipelineConfig::default();
        cfg.emit.mark_patches = true;
        let once = harden_source(&c.source, &c.name, &cfg).unwrap().hardened_source.unwrap();
        let twice = harden_source(&once, &c.name, &cfg).unwrap();
        prop_assert!(twice.patches.is_empty(), "{:?}", twice.patches);
        prop_assert_eq!(twice.hardened_source.unwrap(), once);
    }

    /// Label propagation matches brute-force reachability over the call graph.
    #[test]
    fn enrichment_matches_reachability(seed in any::<u64>()) {
        let g = common::gen_call_graph(seed, 12);
        let unit = parse(&g.source, "graph").unwrap();
        let mut cpg = build_full(&unit).unwrap();
        enrich(&mut cpg);
        for f in cpg.nodes_with(solharden::cpg::Label::Function).collect::<Vec<_>>() {
            let name = cpg.node(f).name().unwrap().to_string();
            prop_assert_eq!(cpg.has_label(f, solharden::cpg::Label::ContainsExternalCall), g.expected_external()[&name]);
            let vars: BTreeSet<String> =
                solharden::enrich::written_vars(&cpg, f).into_iter().map(|v| cpg.node(v).name().unwrap().to_string()).collect();
            prop_assert_eq!(&vars, &g.expected_writes()[&name]);
        }
    }

    /// Every write after a statement that can hand off control is reported, and nothing else.
    #[test]
    fn reentrancy_findings_match_the_oracle(seed in any::<u64>()) {
        let g = common::gen_call_graph(seed, 8);
        let out = analyze_source(&g.source, "graph", &PipelineConfig::default()).unwrap();
        let found: BTreeSet<(String, u32, String)> = out
            .report
            .reentrancy
            .iter()
            .filter_map(|r| Some((r.function.clone(), r.call_line, r.variable.clone()?)))
            .collect();
        prop_assert_eq!(found, g.expected_reentrancy(), "{}", g.source);
    }

    /// On benign runs the hardened trace minus lock bookkeeping is the original trace.
    #[test]
    fn benign_traces_match_modulo_patches(seed in any::<u64>()) {
        let c = common::gen_contract(seed);
        let out = harden_source(&c.source, &c.name, &PipelineConfig::default()).unwrap();
        let scenario = Scenario::from_toml(&common::gen_benign_scenario(&c, seed)).unwrap();
        let report = run_scenario(&out.original, out.hardened.as_ref().unwrap(), &scenario).unwrap();
        for t in &report.txs {
            prop_assert_eq!(t.classification, Classification::Equivalent);
            prop_assert_eq!(comparable_events(&t.hardened), t.original.events.clone());
        }
    }

    /// Identical inputs give byte-identical traces.
    #[test]
    fn replay_is_deterministic(seed in any::<u64>()) {
        let c = common::gen_contract(seed);
        let out = harden_source(&c.source, &c.name, &PipelineConfig::default()).unwrap();
        let scenario = Scenario::from_toml(&common::gen_benign_scenario(&c, seed)).unwrap();
        let hardened = out.hardened.as_ref().unwrap();
        let first = run_scenario(&out.original, hardened, &scenario).unwrap();
        let second = run_scenario(&out.original, hardened, &scenario).unwrap();
        prop_assert_eq!(format!("{first:?}"), format!("{second:?}"));
    }

    /// A reverted transaction leaves no trace in the world; a successful one conserves total balance.
    #[test]
    fn reverts_restore_and_balances_are_conserved(seed in any::<u64>()) {
        let c = common::gen_contract(seed);
        let out = harden_source(&c.source, &c.name, &PipelineConfig::default()).unwrap();
        let scenario = Scenario::from_toml(&common::gen_benign_scenario(&c, seed)).unwrap();
        for unit in [&out.original, out.hardened.as_ref().unwrap()] {
            let mut world = setup_world(unit, &scenario).unwrap();
            for tx in &scenario.txs {
                let before = world.clone();
                let one = Scenario { txs: vec![tx.clone()], ..scenario.clone() };
                let trace = run_world(&mut world, &one).unwrap().remove(0);
                let total = |w: &solharden::vm::World| w.balances.values().sum::<BigInt>();
                prop_assert_eq!(total(&world), total(&before));
                if trace.reverted() {
                    prop_assert_eq!(&world.contracts, &before.contracts);
                    prop_assert_eq!(&world.balances, &before.balances);
                }
            }
        }
    }
}
