//! Purge-based security: `Lpurge` from the initial state and the
//! intransitive purge `dipurge` from every reachable state.

use rustc_hash::FxHashMap;

use crate::error::Result;
use crate::model::{ActionId, DomainId, DomainSet, Pes, StateId, Trace};
use crate::traces::TraceSpace;
use crate::verdict::{Verdict, Witness};

/// The domains that may transitively pass information to `u` along
/// `trace` executed from `s`: `u` itself, plus the domain of every action
/// allowed (at the state where it occurs) to reach one of the domains
/// collected from the rest of the trace.
pub fn dsrc(pes: &Pes, trace: &[ActionId], u: DomainId, s: StateId) -> DomainSet {
    let sig = pes.signature();
    let mut states = Vec::with_capacity(trace.len());
    let mut cur = s;
    for a in trace {
        states.push(cur);
        cur = pes.step(cur, *a);
    }
    let mut set = DomainSet::singleton(u);
    for (a, st) in trace.iter().zip(&states).rev() {
        let d = sig.dom(*a);
        if pes.edge_mask(*st, d).intersects(set) {
            set.insert(d);
        }
    }
    set
}

/// `Lpurge(α, u, s)`: keeps each action whose domain may, at the state
/// where it occurs, reach a domain that can still pass information on to
/// `u`. Removed actions do not change the state used for later decisions.
pub fn lpurge(pes: &Pes, trace: &[ActionId], u: DomainId, s: StateId) -> Trace {
    let sig = pes.signature();
    let mut out = Vec::new();
    let mut cur = s;
    for (i, a) in trace.iter().enumerate() {
        let rest = dsrc(pes, &trace[i..], u, cur);
        if pes.edge_mask(cur, sig.dom(*a)).intersects(rest) {
            out.push(*a);
        }
        cur = pes.step(cur, *a);
    }
    out
}

/// `dipurge(α, u, s)`: keeps the actions whose domain is a source for `u`
/// and advances the state only along kept actions.
pub fn dipurge(pes: &Pes, trace: &[ActionId], u: DomainId, s: StateId) -> Trace {
    let sig = pes.signature();
    let mut out = Vec::new();
    let mut cur = s;
    for (i, a) in trace.iter().enumerate() {
        if dsrc(pes, &trace[i..], u, cur).contains(sig.dom(*a)) {
            out.push(*a);
            cur = pes.step(cur, *a);
        }
    }
    out
}

/// `Lpurge`-security from the initial state: every trace up to `depth`
/// gives every domain the same observation as its purged version.
pub fn check_lpurge_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let sig = pes.signature();
    let space = TraceSpace::new(pes, depth)?;
    let s0 = pes.initial();
    for id in 0..space.len() {
        let trace = space.trace(id);
        for u in sig.domains() {
            let purged = lpurge(pes, &trace, u, s0);
            if pes.obs(pes.run(&purged), u) != pes.obs(space.state(id), u) {
                let w = Witness::Purge {
                    trace: sig.trace_names(&trace),
                    domain: sig.domain_name(u).to_string(),
                    purged: sig.trace_names(&purged),
                };
                return Ok(Verdict::bounded("lpurge", depth, Some(w)));
            }
        }
    }
    Ok(Verdict::bounded("lpurge", depth, None))
}

/// i-security: from every reachable state, traces up to `depth` with equal
/// `dipurge` give equal observations. States are visited breadth-first,
/// traces in shortlex order and domains in declaration order; the witness
/// pairs the offending trace with the first trace of its purge class.
pub fn check_i_security(pes: &Pes, depth: usize) -> Result<Verdict> {
    let sig = pes.signature();
    let reachable = pes.reachable_states();
    for s in &reachable {
        let space = TraceSpace::from_state(pes, *s, depth)?;
        let mut first: Vec<FxHashMap<Trace, usize>> =
            sig.domains().map(|_| FxHashMap::default()).collect();
        for id in 0..space.len() {
            let trace = space.trace(id);
            for u in sig.domains() {
                let key = dipurge(pes, &trace, u, *s);
                let rep = *first[u.index()].entry(key).or_insert(id);
                if pes.obs(space.state(rep), u) != pes.obs(space.state(id), u) {
                    let w = Witness::StatePurge {
                        state: pes.state_name(*s).to_string(),
                        first: sig.trace_names(&trace),
                        second: sig.trace_names(&space.trace(rep)),
                        domain: sig.domain_name(u).to_string(),
                    };
                    return Ok(Verdict::bounded("isec", depth, Some(w)));
                }
            }
        }
    }
    Ok(Verdict::bounded("isec", depth, None).with_note(format!(
        "quantified over the {} reachable states",
        reachable.len()
    )))
}
