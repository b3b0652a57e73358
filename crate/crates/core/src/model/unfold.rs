//! Bounded unfolding into a trace tree, and bounded bisimilarity.

use super::signature::{DomainId, Trace};
use super::system::{Pes, PesBuilder, StateId};
use crate::error::{Error, Result};
use crate::traces::TraceSpace;

/// The depth-`k` unfolding: one state per trace of length at most `k`,
/// numbered in shortlex order and named by the trace. Observations and edges
/// are those of the state each trace reaches. Transitions out of length-`k`
/// traces are self-loops, and those states are marked as frontier.
pub fn unfold(pes: &Pes, depth: usize) -> Result<Pes> {
    let space = TraceSpace::new(pes, depth)?;
    let sig = pes.signature().clone();
    let names: Vec<String> = (0..space.len())
        .map(|id| sig.format_trace(&space.trace(id)))
        .collect();
    let mut b = PesBuilder::new(sig.clone(), names)?;
    b.initial(StateId(0));
    space.for_each_extension(|id, parent, a, _| {
        b.transition(StateId(parent as u32), a, StateId(id as u32))
            .expect("fresh transition");
    });
    let mut frontier = vec![false; space.len()];
    for id in space.level(depth) {
        frontier[id] = true;
    }
    for id in 0..space.len() {
        let s = space.state(id);
        let t = StateId(id as u32);
        for u in sig.domains() {
            b.obs(t, u, pes.obs_value(s, u));
            for v in pes.edge_mask(s, u).iter() {
                b.edge(t, u, v);
            }
        }
    }
    b.truncated(depth, frontier);
    b.build()
}

/// Outcome of a bounded bisimilarity check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bisimilarity {
    pub bisimilar: bool,
    /// First trace (shortlex), then domain, on which observations differ.
    pub witness: Option<(Trace, DomainId)>,
}

/// Compares observations of two systems after every trace of length at
/// most `depth`. Policies are not compared.
pub fn check_bisimilar(m1: &Pes, m2: &Pes, depth: usize) -> Result<Bisimilarity> {
    if m1.signature() != m2.signature() {
        return Err(Error::SignatureMismatch(format!(
            "{} versus {}",
            m1.signature(),
            m2.signature()
        )));
    }
    let s1 = TraceSpace::new(m1, depth)?;
    let s2 = TraceSpace::new(m2, depth)?;
    for id in 0..s1.len() {
        for u in m1.signature().domains() {
            if m1.obs_value(s1.state(id), u) != m2.obs_value(s2.state(id), u) {
                return Ok(Bisimilarity {
                    bisimilar: false,
                    witness: Some((s1.trace(id), u)),
                });
            }
        }
    }
    Ok(Bisimilarity {
        bisimilar: true,
        witness: None,
    })
}
