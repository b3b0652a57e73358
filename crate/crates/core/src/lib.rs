//! Bounded verification of dynamic intransitive noninterference.
//!
//! A *policy-enhanced system* is a finite deterministic automaton whose
//! states carry an observation for every security domain and a reflexive
//! "may flow to" relation between domains. This crate decides, for all
//! traces up to a depth bound, whether such a system is secure under several
//! readings of a dynamic policy:
//!
//! * the permissive tree semantics `ta◇` ([`purge`]),
//! * the prohibitive tree semantics `ta□`, equivalently the unwinding
//!   relations ([`unwinding`]),
//! * purge-based comparison semantics ([`checkers::purges`]),
//!
//! and it offers sound unbounded certification by state-level unwinding
//! ([`checkers::state_unwinding_check`]), reference-monitor conditions on
//! structured state ([`access`]), and an executable capability system
//! ([`capability`]).

pub mod access;
pub mod capability;
pub mod checkers;
pub mod error;
pub mod format;
pub mod gen;
pub mod model;
pub mod partition;
pub mod purge;
pub mod report;
pub mod traces;
pub mod tree;
pub mod unwinding;
pub mod verdict;
pub mod corpus;

pub use error::{Error, Result};
pub use model::{ActionId, DomainId, DomainSet, Pes, Signature, StateId, Trace};
pub use traces::TraceSpace;
pub use tree::{TreeId, TreeStore};
pub use verdict::{Outcome, Verdict, Witness};
