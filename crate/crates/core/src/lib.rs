//! Hardening compiler for MiniSol, a Solidity-like contract language.
//!
//! The pipeline parses source into an AST, lifts it into a code property
//! graph, enriches the graph with call and state-write facts, detects
//! reentrancy and integer bugs with graph queries, inserts runtime guards,
//! and pretty-prints hardened source. A deterministic interpreter replays
//! transaction scenarios against original and hardened code.

pub mod cpg;
pub mod detect;
pub mod emit;
pub mod enrich;
pub mod frontend;
pub mod harden;
pub mod pipeline;
pub mod report;
pub mod vm;
