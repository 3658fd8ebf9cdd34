//! Bug pattern queries over an enriched CPG.

pub mod integer;
pub mod reentrancy;

pub use integer::{find_integer_sites, IntBugKind, IntegerBug, MitigationPoint, Position};
pub use reentrancy::{find_reentrancy, ReentrancyBug, ReentrancyKind};
