//! Seeded generators for contracts, scenarios and call graphs shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

pub fn corpus_file(name: &str) -> String {
    std::fs::read_to_string(corpus_dir().join(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every `.msol` file shipped in the corpus, sorted by name.
pub fn corpus_sources() -> Vec<(String, String)> {
    let mut files: Vec<_> = std::fs::read_dir(corpus_dir())
        .unwrap()
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "msol"))
        .collect();
    files.sort();
    files
        .into_iter()
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read_to_string(&p).unwrap()))
        .collect()
}

/// How a scenario fills one parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    /// uint256 amount small enough that balances never wrap.
    Amount,
    /// uint256 loop bound or multiplier.
    Small,
    /// uint256 that sometimes exceeds 255.
    Byte,
    /// int16 in a range the guard admits and rejects.
    Signed,
    /// One of the scenario's user accounts.
    User,
}

#[derive(Debug, Clone)]
pub struct Entry {
    pub name: String,
    pub params: Vec<ParamKind>,
    pub payable: bool,
}

#[derive(Debug, Clone)]
pub struct GenContract {
    pub name: String,
    pub source: String,
    pub entries: Vec<Entry>,
}

const USERS: [&str; 4] = ["0x10", "0x11", "0x12", "0x13"];

fn entry(name: String, params: &[ParamKind], payable: bool) -> Entry {
    Entry { name, params: params.to_vec(), payable }
}

/// Appends one function built from template `t`; `k` keeps names unique.
fn template(t: usize, k: usize, r: &mut ChaCha8Rng, body: &mut String, entries: &mut Vec<Entry>) {
    use ParamKind::*;
    let c = r.gen_range(1..5);
    match t {
        0 => {
            let _ = write!(
                body,
                "  function deposit{k}() public payable {{\n    bal[msg.sender] += msg.value;\n    total = total + msg.value;\n  }}\n"
            );
            entries.push(entry(format!("deposit{k}"), &[], true));
        }
        1 => {
            let _ = write!(
                body,
                "  function withdraw{k}(uint256 amount) public {{\n    if (bal[msg.sender] >= amount) {{\n      msg.sender.call.value(amount)(\"\");\n      bal[msg.sender] -= amount;\n      total = total - amount;\n    }}\n  }}\n"
            );
            entries.push(entry(format!("withdraw{k}"), &[Amount], false));
        }
        2 => {
            let _ = write!(
                body,
                "  function take{k}(uint256 amount) public {{\n    require(bal[msg.sender] >= amount, \"low\");\n    bal[msg.sender] -= amount;\n    total -= amount;\n    msg.sender.transfer(amount);\n  }}\n"
            );
            entries.push(entry(format!("take{k}"), &[Amount], false));
        }
        3 => {
            let _ = write!(body, "  function bump{k}(uint256 step) public {{\n    counter = counter + step * {c};\n  }}\n");
            entries.push(entry(format!("bump{k}"), &[Small], false));
        }
        4 => {
            let _ = write!(
                body,
                "  function spin{k}(uint256 n) public {{\n    for (uint256 i = 0; i < n; i++) {{\n      counter += i;\n    }}\n  }}\n"
            );
            entries.push(entry(format!("spin{k}"), &[Small], false));
        }
        5 => {
            let _ = write!(body, "  function tick{k}() public {{\n    if (tick < 250) {{\n      tick++;\n    }}\n  }}\n");
            entries.push(entry(format!("tick{k}"), &[], false));
        }
        6 => {
            let _ = write!(
                body,
                "  function drift{k}(int16 d) public {{\n    if (d > -100 && d < 100) {{\n      drift = drift + d;\n    }}\n  }}\n"
            );
            entries.push(entry(format!("drift{k}"), &[Signed], false));
        }
        7 => {
            let _ = write!(
                body,
                "  function narrow{k}(uint256 v) public {{\n    if (v < 256) {{\n      tick = uint8(v);\n    }}\n  }}\n"
            );
            entries.push(entry(format!("narrow{k}"), &[Byte], false));
        }
        8 => {
            let _ = write!(
                body,
                "  function credit{k}(address who, uint256 v) internal {{\n    bal[who] += v;\n    total += v;\n  }}\n  function gift{k}(address to) public payable {{\n    credit{k}(to, msg.value);\n  }}\n"
            );
            entries.push(entry(format!("gift{k}"), &[User], true));
        }
        9 => {
            let _ = write!(body, "  function read{k}(address who) public returns (uint256) {{\n    return bal[who];\n  }}\n");
            entries.push(entry(format!("read{k}"), &[User], false));
        }
        10 => {
            let _ = write!(body, "  function toggle{k}() public {{\n    flag = !flag;\n  }}\n");
            entries.push(entry(format!("toggle{k}"), &[], false));
        }
        11 => {
            let _ = write!(
                body,
                "  function payout{k}(address to, uint256 amount) public {{\n    if (bal[msg.sender] >= amount) {{\n      to.call.value(amount)(\"\");\n      bal[msg.sender] -= amount;\n      total -= amount;\n    }}\n  }}\n"
            );
            entries.push(entry(format!("payout{k}"), &[User, Amount], false));
        }
        12 => {
            let _ = write!(
                body,
                "  function walk{k}(uint256 n) public {{\n    uint256 j = 0;\n    while (j < n) {{\n      j = j + 1;\n      counter = counter + {c};\n    }}\n  }}\n"
            );
            entries.push(entry(format!("walk{k}"), &[Small], false));
        }
        _ => {
            let _ = write!(
                body,
                "  function gate{k}(uint256 amount) public returns (bool) {{\n    require(amount <= 40, \"too much\");\n    if (amount > 10) {{\n      counter += 1;\n      return true;\n    }} else {{\n      uint256 tmp = counter + {c};\n      return tmp > 100;\n    }}\n  }}\n"
            );
            entries.push(entry(format!("gate{k}"), &[Amount], false));
        }
    }
}

pub const TEMPLATES: usize = 14;

/// A contract with a deposit entry point and a random selection of other templates.
pub fn gen_contract(seed: u64) -> GenContract {
    let mut r = rng(seed);
    let name = format!("Gen{seed}");
    let mut body = String::new();
    let mut entries = Vec::new();
    let mut picks: Vec<usize> = vec![0];
    for _ in 0..r.gen_range(2..7) {
        picks.push(r.gen_range(1..TEMPLATES));
    }
    for (k, t) in picks.into_iter().enumerate() {
        template(t, k, &mut r, &mut body, &mut entries);
    }
    let source = format!(
        "contract {name} {{\n  mapping(address => uint256) bal;\n  uint256 total;\n  uint256 counter;\n  uint8 tick;\n  int16 drift;\n  bool flag;\n\n{body}}}\n"
    );
    GenContract { name, source, entries }
}

/// A benign transaction sequence over `c`, as scenario text.
pub fn gen_benign_scenario(c: &GenContract, seed: u64) -> String {
    let mut r = rng(seed ^ 0x5eed);
    let mut s = String::from("[accounts]\n");
    for u in USERS {
        let _ = writeln!(s, "\"{u}\" = 10000");
    }
    let _ = write!(s, "\n[[deploy]]\ncontract = \"{}\"\naddress = \"0x100\"\n", c.name);
    // every scenario opens with deposits so the withdrawal paths have something to move
    let mut calls: Vec<&Entry> = vec![&c.entries[0], &c.entries[0]];
    for _ in 0..r.gen_range(4..14) {
        calls.push(c.entries.choose(&mut r).unwrap());
    }
    for e in calls {
        let sender = USERS.choose(&mut r).unwrap();
        let args: Vec<String> = e
            .params
            .iter()
            .map(|p| match p {
                ParamKind::Amount => r.gen_range(0..60).to_string(),
                ParamKind::Small => r.gen_range(0..12).to_string(),
                ParamKind::Byte => r.gen_range(0..300).to_string(),
                ParamKind::Signed => r.gen_range(-150..150).to_string(),
                ParamKind::User => format!("\"{}\"", USERS.choose(&mut r).unwrap()),
            })
            .collect();
        let _ = write!(s, "\n[[tx]]\nsender = \"{sender}\"\nto = \"0x100\"\nfn = \"{}\"\nargs = [{}]\n", e.name, args.join(", "));
        if e.payable {
            let _ = writeln!(s, "value = {}", r.gen_range(0..50));
        }
    }
    s
}

/// One statement of a generated call-graph function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphStmt {
    Call(usize),
    External,
    Write(String),
    Read,
}

/// Ground truth for a generated call graph, kept independent of the analysis under test.
#[derive(Debug, Clone)]
pub struct CallGraph {
    pub source: String,
    /// Statements of each function `f<i>` in order, with their source lines.
    pub bodies: Vec<Vec<(GraphStmt, u32)>>,
}

impl CallGraph {
    fn direct<'a>(&'a self, f: usize) -> impl Iterator<Item = &'a GraphStmt> + 'a {
        self.bodies[f].iter().map(|(s, _)| s)
    }

    fn reachable(&self, from: usize) -> BTreeSet<usize> {
        let mut seen = BTreeSet::from([from]);
        let mut stack = vec![from];
        while let Some(f) = stack.pop() {
            for s in self.direct(f) {
                if let GraphStmt::Call(g) = s {
                    if seen.insert(*g) {
                        stack.push(*g);
                    }
                }
            }
        }
        seen
    }

    fn external(&self, f: usize) -> bool {
        self.reachable(f).iter().any(|&g| self.direct(g).any(|s| *s == GraphStmt::External))
    }

    fn writes(&self, f: usize) -> BTreeSet<String> {
        self.reachable(f)
            .iter()
            .flat_map(|&g| self.direct(g).filter_map(|s| if let GraphStmt::Write(v) = s { Some(v.clone()) } else { None }))
            .collect()
    }

    fn stmt_writes(&self, s: &GraphStmt) -> BTreeSet<String> {
        match s {
            GraphStmt::Write(v) => BTreeSet::from([v.clone()]),
            GraphStmt::Call(g) => self.writes(*g),
            _ => BTreeSet::new(),
        }
    }

    /// Brute force: `f` contains an external call iff some function reachable from it makes one.
    pub fn expected_external(&self) -> BTreeMap<String, bool> {
        (0..self.bodies.len()).map(|f| (format!("f{f}"), self.external(f))).collect()
    }

    pub fn expected_writes(&self) -> BTreeMap<String, BTreeSet<String>> {
        (0..self.bodies.len()).map(|f| (format!("f{f}"), self.writes(f))).collect()
    }

    /// `(function, call line, variable)` for every state write that follows a statement
    /// which may hand control to outside code.
    pub fn expected_reentrancy(&self) -> BTreeSet<(String, u32, String)> {
        let mut out = BTreeSet::new();
        for (f, body) in self.bodies.iter().enumerate() {
            for (i, (s, line)) in body.iter().enumerate() {
                let hands_off = match s {
                    GraphStmt::External => true,
                    GraphStmt::Call(g) => self.external(*g),
                    _ => false,
                };
                if !hands_off {
                    continue;
                }
                for (later, _) in &body[i + 1..] {
                    for v in self.stmt_writes(later) {
                        out.insert((format!("f{f}"), *line, v));
                    }
                }
            }
        }
        out
    }
}

const STATE: [&str; 4] = ["s0", "s1", "s2", "m"];
const HEADER_LINES: u32 = 5;

/// A contract of up to `max_fns` functions calling each other at random, cycles included.
pub fn gen_call_graph(seed: u64, max_fns: usize) -> CallGraph {
    let mut r = rng(seed);
    let n = r.gen_range(1..=max_fns);
    let mut bodies = Vec::new();
    let mut body = String::new();
    let mut line = HEADER_LINES;
    for f in 0..n {
        let mut stmts: Vec<(GraphStmt, String)> = Vec::new();
        for g in 0..n {
            if r.gen_bool(0.2) {
                stmts.push((GraphStmt::Call(g), format!("f{g}();")));
            }
        }
        if r.gen_bool(0.25) {
            let call = ["msg.sender.transfer(0);", "msg.sender.call.value(0)(\"\");", "msg.sender.delegatecall();"]
                .choose(&mut r)
                .unwrap();
            stmts.push((GraphStmt::External, call.to_string()));
        }
        for v in STATE {
            if r.gen_bool(0.2) {
                let text = match v {
                    "m" => "m[msg.sender] = 1;".to_string(),
                    "s1" => "s1++;".to_string(),
                    other => format!("{other} = {other} + 1;"),
                };
                stmts.push((GraphStmt::Write(v.to_string()), text));
            }
        }
        // reads must not count as writes
        if r.gen_bool(0.3) {
            stmts.push((GraphStmt::Read, "uint256 t = s0 + s2;".to_string()));
        }
        stmts.shuffle(&mut r);
        let vis = if r.gen_bool(0.5) { "public" } else { "internal" };
        let _ = writeln!(body, "  function f{f}() {vis} {{");
        line += 1;
        let mut lines = Vec::new();
        for (s, text) in stmts {
            line += 1;
            let _ = writeln!(body, "    {text}");
            lines.push((s, line));
        }
        body.push_str("  }\n");
        line += 1;
        bodies.push(lines);
    }
    let source =
        format!("contract G {{\n  uint256 s0;\n  uint256 s1;\n  uint256 s2;\n  mapping(address => uint256) m;\n{body}}}\n");
    CallGraph { source, bodies }
}
