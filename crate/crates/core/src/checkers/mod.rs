//! Security verdicts and policy analyses.
//!
//! Trace-quantified checks enumerate every trace up to a bound and report
//! either a concrete witness or `BOUNDED_SECURE`; only the state-level
//! unwinding method in [`state_unwinding_check`] certifies security for all
//! traces.

pub mod purges;
mod state;

pub use purges::{check_i_security, check_lpurge_security, dipurge, dsrc, lpurge};
pub use state::{state_unwinding_check, StateUnwinding, UnwindingMode};

use rustc_hash::FxHashMap;

use crate::error::{Error, Result};
use crate::model::{unfold, DomainId, DomainSet, Pes, StateId, Trace};
use crate::partition::TracePartition;
use crate::purge::{check_f_security, ta_may_table, ta_static_table, Mode, StaticPolicy};
use crate::traces::TraceSpace;
use crate::tree::TreeStore;
use crate::unwinding::{ta_must_table, unwinding_partition, PairKnowledge};
use crate::verdict::{Outcome, Verdict, Witness};

/// `ta◇`-security up to `depth`.
pub fn check_ta_may_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let space = TraceSpace::new(pes, depth)?;
    let mut store = TreeStore::new();
    let parts = ta_may_table(&mut store, pes, &space).partitions();
    Ok(check_f_security("mayta", &parts, pes, &space, Mode::FinalObs))
}

/// Security under the static tree semantics, using the policy in force at
/// the initial state. For dynamic policies the verdict is annotated.
pub fn check_ta_static_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let space = TraceSpace::new(pes, depth)?;
    let mut store = TreeStore::new();
    let policy = StaticPolicy::at_state(pes, pes.initial());
    let parts = ta_static_table(&mut store, pes.signature(), &policy, &space).partitions();
    let v = check_f_security("ta", &parts, pes, &space, Mode::FinalObs);
    Ok(if check_static(pes) {
        v
    } else {
        v.with_note("the policy is not static; the edges of the initial state were used")
    })
}

/// `ta□`-security up to `depth`, via the trees themselves.
pub fn check_ta_must_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let space = TraceSpace::new(pes, depth)?;
    let unw = unwinding_partition(pes, &space);
    let mut store = TreeStore::new();
    let parts = ta_must_table(&mut store, pes, &space, &unw).partitions();
    Ok(check_f_security("mustta", &parts, pes, &space, Mode::FinalObs))
}

/// Unwinding-security up to `depth`. The witness, if any, is a pair merged
/// by a single rule application.
pub fn check_unwinding_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let space = TraceSpace::new(pes, depth)?;
    let unw = unwinding_partition(pes, &space);
    let mut v = check_f_security("unwinding", &unw.partitions, pes, &space, Mode::FinalObs);
    if !unw.saturated {
        v = v.with_note("closure stopped before saturation");
    }
    Ok(v)
}

/// Which relations locality is checked against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LocalityMode {
    /// `α ∼_u β` and `α ∼_v β` imply equal `u ↣ v`.
    Joint,
    /// Locally known to the sender: `α ∼_u β` implies equal `u ↣ v` for all `v`.
    Sender,
    /// Locally known to the receiver: `α ∼_v β` implies equal `u ↣ v` for all `u`.
    Receiver,
}

/// Locality of the policy with respect to the `ta◇` relations.
pub fn check_locality(pes: &Pes, depth: usize, mode: LocalityMode) -> Result<Verdict> {
    let space = TraceSpace::new(pes, depth)?;
    let mut store = TreeStore::new();
    let parts = ta_may_table(&mut store, pes, &space).partitions();
    Ok(locality_verdict(pes, &space, &parts, space.len(), mode))
}

pub(crate) fn locality_verdict(
    pes: &Pes,
    space: &TraceSpace,
    parts: &[TracePartition],
    limit: usize,
    mode: LocalityMode,
) -> Verdict {
    let property = match mode {
        LocalityMode::Joint => "locality",
        LocalityMode::Sender => "locality-sender",
        LocalityMode::Receiver => "locality-receiver",
    };
    let sig = pes.signature();
    let witness = locality_witness(pes, space, parts, limit, mode).map(|(x, y, u, v)| {
        Witness::Locality {
            first: sig.trace_names(&space.trace(x)),
            second: sig.trace_names(&space.trace(y)),
            from: sig.domain_name(u).to_string(),
            to: sig.domain_name(v).to_string(),
        }
    });
    Verdict::bounded(property, space.depth(), witness)
}

/// First violation `(representative, trace, u, v)`: the shortlex-least
/// trace whose edge differs from the earliest related trace, ties broken by
/// domain pair order.
pub(crate) fn locality_witness(
    pes: &Pes,
    space: &TraceSpace,
    parts: &[TracePartition],
    limit: usize,
    mode: LocalityMode,
) -> Option<(usize, usize, DomainId, DomainId)> {
    let sig = pes.signature();
    let mut best: Option<(usize, usize, DomainId, DomainId)> = None;
    let mut first: FxHashMap<(u32, u32), usize> = FxHashMap::default();
    let limit = limit.min(space.len());
    for u in sig.domains() {
        for v in sig.domains() {
            if u == v {
                continue;
            }
            let (pu, pv) = (&parts[u.index()], &parts[v.index()]);
            first.clear();
            for id in 0..limit {
                if best.is_some_and(|(_, b, _, _)| id >= b) {
                    break;
                }
                let key = match mode {
                    LocalityMode::Joint => (pu.reps()[id], pv.reps()[id]),
                    LocalityMode::Sender => (pu.reps()[id], 0),
                    LocalityMode::Receiver => (pv.reps()[id], 0),
                };
                let rep = *first.entry(key).or_insert(id);
                if pes.edge(space.state(rep), u, v) != pes.edge(space.state(id), u, v) {
                    best = Some((rep, id, u, v));
                    break;
                }
            }
        }
    }
    best
}

/// True iff every reachable state carries the same edges.
pub fn check_static(pes: &Pes) -> bool {
    let reach = pes.reachable_states();
    reach
        .iter()
        .all(|s| pes.edge_row(*s) == pes.edge_row(reach[0]))
}

/// The static-policy check as a verdict; the witness pairs the empty
/// trace with a shortest trace reaching a state with different edges.
pub fn static_verdict(pes: &Pes) -> Verdict {
    let sig = pes.signature();
    let s0 = pes.initial();
    let mut parent: Vec<Option<(StateId, crate::model::ActionId)>> = vec![None; pes.state_count()];
    let mut seen = vec![false; pes.state_count()];
    let mut queue = std::collections::VecDeque::from([s0]);
    seen[s0.index()] = true;
    while let Some(s) = queue.pop_front() {
        if pes.edge_row(s) != pes.edge_row(s0) {
            let mut trace = Vec::new();
            let mut cur = s;
            while let Some((p, a)) = parent[cur.index()] {
                trace.push(a);
                cur = p;
            }
            trace.reverse();
            let (u, v) = sig
                .domains()
                .flat_map(|u| sig.domains().map(move |v| (u, v)))
                .find(|(u, v)| pes.edge(s, *u, *v) != pes.edge(s0, *u, *v))
                .expect("rows differ");
            let mut verdict = Verdict::new("static", Outcome::Fails, None);
            verdict.witness = Some(Witness::EdgePair {
                first: Vec::new(),
                second: sig.trace_names(&trace),
                from: sig.domain_name(u).to_string(),
                to: sig.domain_name(v).to_string(),
            });
            return verdict;
        }
        for a in sig.actions() {
            let t = pes.step(s, a);
            if !seen[t.index()] {
                seen[t.index()] = true;
                parent[t.index()] = Some((s, a));
                queue.push_back(t);
            }
        }
    }
    Verdict::new("static", Outcome::Holds, None)
}

/// Globally known policies: the policy domain may inform everyone (GK1)
/// and the policy is determined by the policy domain's past actions (GK2).
/// Locality is cross-checked, since it is implied.
pub fn check_globally_known(pes: &Pes, policy_domain: DomainId, depth: usize) -> Result<Verdict> {
    let sig = pes.signature();
    let space = TraceSpace::new(pes, depth)?;
    let p = policy_domain;
    if p.index() >= sig.domain_count() {
        return Err(Error::unknown("domain", format!("#{}", p.0)));
    }
    // GK1
    for id in 0..space.len() {
        let s = space.state(id);
        if let Some(u) = sig.domains().find(|u| !pes.edge(s, p, *u)) {
            let w = Witness::Edge {
                trace: sig.trace_names(&space.trace(id)),
                from: sig.domain_name(p).to_string(),
                to: sig.domain_name(u).to_string(),
            };
            return Ok(Verdict::bounded("gk", depth, Some(w))
                .with_note(format!("GK1 fails: {} does not flow to every domain", sig.domain_name(p))));
        }
    }
    // GK2: intern the projection of every trace onto the policy domain's actions.
    let mut proj: Vec<u32> = Vec::with_capacity(space.len());
    proj.push(0);
    let mut index: FxHashMap<(u32, u16), u32> = FxHashMap::default();
    space.for_each_extension(|_, parent, a, _| {
        let q = proj[parent];
        let next = if sig.dom(a) == p {
            let fresh = index.len() as u32 + 1;
            *index.entry((q, a.0)).or_insert(fresh)
        } else {
            q
        };
        proj.push(next);
    });
    let mut first: FxHashMap<u32, usize> = FxHashMap::default();
    for (id, key) in proj.iter().enumerate() {
        let rep = *first.entry(*key).or_insert(id);
        let (s, t) = (space.state(rep), space.state(id));
        if pes.edge_row(s) != pes.edge_row(t) {
            let (u, v) = sig
                .domains()
                .flat_map(|u| sig.domains().map(move |v| (u, v)))
                .find(|(u, v)| pes.edge(s, *u, *v) != pes.edge(t, *u, *v))
                .expect("rows differ");
            let w = Witness::EdgePair {
                first: sig.trace_names(&space.trace(rep)),
                second: sig.trace_names(&space.trace(id)),
                from: sig.domain_name(u).to_string(),
                to: sig.domain_name(v).to_string(),
            };
            return Ok(Verdict::bounded("gk", depth, Some(w)).with_note(format!(
                "GK2 fails: the policy is not determined by the actions of {}",
                sig.domain_name(p)
            )));
        }
    }
    let mut store = TreeStore::new();
    let parts = ta_may_table(&mut store, pes, &space).partitions();
    let loc = locality_verdict(pes, &space, &parts, space.len(), LocalityMode::Joint);
    let note = if loc.outcome == Outcome::BoundedSecure {
        "locality holds, as implied".to_string()
    } else {
        "unexpected: the policy is globally known but not local".to_string()
    };
    Ok(Verdict::bounded("gk", depth, None).with_note(note))
}

/// `A ≤ B`: after every trace up to `depth`, every edge of A is an edge of B.
pub fn policy_leq(a: &Pes, b: &Pes, depth: usize) -> Result<bool> {
    Ok(policy_leq_witness(a, b, depth)?.is_none())
}

/// The first trace and edge present in A but not in B.
pub fn policy_leq_witness(
    a: &Pes,
    b: &Pes,
    depth: usize,
) -> Result<Option<(Trace, DomainId, DomainId)>> {
    if a.signature() != b.signature() {
        return Err(Error::SignatureMismatch(format!(
            "{} versus {}",
            a.signature(),
            b.signature()
        )));
    }
    let sa = TraceSpace::new(a, depth)?;
    let sb = TraceSpace::new(b, depth)?;
    for id in 0..sa.len() {
        for u in a.signature().domains() {
            let extra = DomainSet(a.edge_mask(sa.state(id), u).0 & !b.edge_mask(sb.state(id), u).0);
            if let Some(v) = extra.iter().next() {
                return Ok(Some((sa.trace(id), u, v)));
            }
        }
    }
    Ok(None)
}

/// Restricts the policy to its distributed-knowledge core on the depth-k
/// unfold: `α ⊨ u ↣′ v` iff the edge holds at `α` and at every trace,
/// shorter than the bound, related to `α` by both `∼unw_u` and `∼unw_v`.
pub fn restrict_to_local(pes: &Pes, depth: usize) -> Result<Pes> {
    let space = TraceSpace::new(pes, depth)?;
    let unw = unwinding_partition(pes, &space);
    let know = PairKnowledge::new(&unw, pes, &space);
    let tree = unfold(pes, depth)?;
    Ok(tree.with_policy(|s, u| {
        pes.signature()
            .domains()
            .filter(|v| know.holds(&unw, pes, &space, s.index(), u, *v))
            .collect()
    }))
}
