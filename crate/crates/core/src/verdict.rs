//! Verdicts and counterexample witnesses.
//!
//! Witnesses name traces, domains and states by their identifiers rather
//! than by index, so they serialize readably and can be replayed against a
//! freshly parsed system.

use serde::Serialize;

use crate::error::Result;
use crate::model::{ActionId, DomainId, Pes, Signature, StateId};

/// Result of one property check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Outcome {
    /// A concrete counterexample was found.
    Insecure,
    /// No counterexample among traces up to the depth bound.
    BoundedSecure,
    /// Proven for all traces by a sound finite-state argument.
    CertifiedSecure,
    /// A sufficient condition failed; nothing follows either way.
    Inconclusive,
    /// A non-security structural property holds (e.g. the policy is static).
    Holds,
    /// A non-security structural property fails.
    Fails,
}

impl Outcome {
    /// True for outcomes that count as success for exit codes.
    pub fn is_ok(self) -> bool {
        matches!(
            self,
            Outcome::BoundedSecure | Outcome::CertifiedSecure | Outcome::Holds
        )
    }
}

/// A trace as a list of action names.
pub type NamedTrace = Vec<String>;

/// Evidence attached to a negative outcome.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    /// Two traces related by the property's equivalence, with different
    /// observations for `domain`.
    TracePair {
        first: NamedTrace,
        second: NamedTrace,
        domain: String,
    },
    /// A trace whose purged version yields a different observation.
    Purge {
        trace: NamedTrace,
        domain: String,
        purged: NamedTrace,
    },
    /// Two traces related for both `from` and `to` on which the edge
    /// `from ↣ to` differs.
    Locality {
        first: NamedTrace,
        second: NamedTrace,
        from: String,
        to: String,
    },
    /// Two traces from `state` with equal purges and different observations.
    StatePurge {
        state: String,
        first: NamedTrace,
        second: NamedTrace,
        domain: String,
    },
    /// Two states related by a state-level relation with different
    /// observations.
    StatePair {
        first: String,
        second: String,
        domain: String,
    },
    /// A trace after which the edge `from ↣ to` is (or is not) present.
    Edge {
        trace: NamedTrace,
        from: String,
        to: String,
    },
    /// Two traces with different edges `from ↣ to` that the property
    /// requires to agree.
    EdgePair {
        first: NamedTrace,
        second: NamedTrace,
        from: String,
        to: String,
    },
    /// A violated reference-monitor condition.
    Reference {
        condition: String,
        states: Vec<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        action: Option<String>,
        #[serde(skip_serializing_if = "Option::is_none")]
        object: Option<String>,
        domains: Vec<String>,
    },
}

impl Witness {
    /// Re-runs the witness against `pes` and confirms it shows what it
    /// claims: differing observations (or edges), and for purge witnesses
    /// that the purged trace is the purge of the original. `Reference`
    /// witnesses concern a structured system and cannot be replayed here.
    pub fn replay(&self, pes: &Pes) -> Result<bool> {
        let sig = pes.signature();
        let trace = |t: &NamedTrace| sig.trace_from_names(t);
        let obs_differs = |a: StateId, b: StateId, d: &str| -> Result<bool> {
            let u = sig.domain_id(d)?;
            Ok(pes.obs(a, u) != pes.obs(b, u))
        };
        let edge_differs = |a: StateId, b: StateId, from: &str, to: &str| -> Result<bool> {
            let (u, v) = (sig.domain_id(from)?, sig.domain_id(to)?);
            Ok(pes.edge(a, u, v) != pes.edge(b, u, v))
        };
        match self {
            Witness::TracePair { first, second, domain } => {
                obs_differs(pes.run(&trace(first)?), pes.run(&trace(second)?), domain)
            }
            Witness::Purge { trace: t, domain, purged } => {
                let (t, p) = (trace(t)?, trace(purged)?);
                let u = sig.domain_id(domain)?;
                Ok(crate::checkers::lpurge(pes, &t, u, pes.initial()) == p
                    && obs_differs(pes.run(&t), pes.run(&p), domain)?)
            }
            Witness::StatePurge { state, first, second, domain } => {
                let s = pes.state_id(state)?;
                let (a, b) = (trace(first)?, trace(second)?);
                let u = sig.domain_id(domain)?;
                let dip = |t: &[ActionId]| crate::checkers::dipurge(pes, t, u, s);
                Ok(dip(&a) == dip(&b) && obs_differs(pes.run_from(s, &a), pes.run_from(s, &b), domain)?)
            }
            Witness::StatePair { first, second, domain } => {
                obs_differs(pes.state_id(first)?, pes.state_id(second)?, domain)
            }
            Witness::Locality { first, second, from, to } | Witness::EdgePair { first, second, from, to } => {
                edge_differs(pes.run(&trace(first)?), pes.run(&trace(second)?), from, to)
            }
            Witness::Edge { trace: t, from, to } => {
                Ok(!pes.edge(pes.run(&trace(t)?), sig.domain_id(from)?, sig.domain_id(to)?))
            }
            Witness::Reference { .. } => Ok(true),
        }
    }

    pub(crate) fn trace_pair(sig: &Signature, a: &[ActionId], b: &[ActionId], u: DomainId) -> Self {
        Witness::TracePair {
            first: sig.trace_names(a),
            second: sig.trace_names(b),
            domain: sig.domain_name(u).to_string(),
        }
    }
}

/// A property's outcome with its witness and caveats.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub property: String,
    pub outcome: Outcome,
    pub witness: Option<Witness>,
    pub depth: Option<usize>,
    pub notes: Vec<String>,
}

impl Verdict {
    pub fn new(property: &str, outcome: Outcome, depth: Option<usize>) -> Self {
        Verdict {
            property: property.to_string(),
            outcome,
            witness: None,
            depth,
            notes: Vec::new(),
        }
    }

    pub(crate) fn bounded(property: &str, depth: usize, witness: Option<Witness>) -> Self {
        Verdict {
            property: property.to_string(),
            outcome: if witness.is_some() {
                Outcome::Insecure
            } else {
                Outcome::BoundedSecure
            },
            witness,
            depth: Some(depth),
            notes: Vec::new(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }

    pub fn is_insecure(&self) -> bool {
        self.outcome == Outcome::Insecure
    }
}
