//! Shared fixtures and independent brute-force oracles for the integration
//! tests. The oracles deliberately avoid the library's trace numbering,
//! union-find and interning: they work on explicit traces, boolean
//! relation matrices and boxed trees.

#![allow(dead_code)]

use std::collections::HashMap;

use dynflow::gen::{random_system, rng, SystemShape};
use dynflow::tree::Tree;
use dynflow::{corpus, ActionId, DomainId, Pes};

/// The four bundled systems with their base policies.
pub fn corpus_bases() -> Vec<(String, Pes)> {
    vec![
        ("figure1".into(), corpus::figure1()),
        ("figure2".into(), corpus::figure2(false)),
        ("figure3".into(), corpus::figure3()),
        ("figure4".into(), corpus::figure4(false)),
    ]
}

/// `count` random systems (at most 4 states, 3 actions, 3 domains).
pub fn random_systems(count: usize, seed: u64) -> Vec<(String, Pes)> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| (format!("random{i}"), random_system(&mut r, SystemShape::default())))
        .collect()
}

/// The corpus plus twenty random systems.
pub fn suite() -> Vec<(String, Pes)> {
    let mut out = corpus_bases();
    out.extend(random_systems(20, 0x5eed));
    out
}

/// All traces of length at most `k`, shortest first.
pub fn all_traces(pes: &Pes, k: usize) -> Vec<Vec<ActionId>> {
    let actions: Vec<ActionId> = pes.signature().actions().collect();
    let mut out = vec![Vec::new()];
    let mut level = vec![Vec::new()];
    for _ in 0..k {
        let mut next = Vec::new();
        for t in &level {
            for a in &actions {
                let mut t2: Vec<ActionId> = t.clone();
                t2.push(*a);
                next.push(t2);
            }
        }
        out.extend(next.iter().cloned());
        level = next;
    }
    out
}

/// The least equivalences closed under both rules within the bound,
/// computed by iterating the rules and Warshall's transitive closure on
/// explicit boolean matrices until nothing changes.
pub struct NaiveClosure {
    pub traces: Vec<Vec<ActionId>>,
    pub index: HashMap<Vec<ActionId>, usize>,
    /// `rel[u][i][j]`.
    pub rel: Vec<Vec<Vec<bool>>>,
}

impl NaiveClosure {
    pub fn new(pes: &Pes, k: usize) -> Self {
        let sig = pes.signature();
        let traces = all_traces(pes, k);
        let index: HashMap<Vec<ActionId>, usize> =
            traces.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        let n = traces.len();
        let nd = sig.domain_count();
        let mut rel = vec![vec![vec![false; n]; n]; nd];
        for r in rel.iter_mut() {
            for (i, row) in r.iter_mut().enumerate() {
                row[i] = true;
            }
        }
        let ext = |t: &[ActionId], a: ActionId| {
            let mut t2 = t.to_vec();
            t2.push(a);
            index[&t2]
        };
        loop {
            let mut changed = false;
            for (i, t) in traces.iter().enumerate().filter(|(_, t)| t.len() < k) {
                let s = pes.run(t);
                for a in sig.actions() {
                    let j = ext(t, a);
                    for u in sig.domains() {
                        if !pes.edge(s, sig.dom(a), u) {
                            set(&mut rel, &mut changed, u.index(), i, j);
                        }
                    }
                }
            }
            for i in 0..n {
                for j in 0..n {
                    if traces[i].len() >= k || traces[j].len() >= k {
                        continue;
                    }
                    for a in sig.actions() {
                        let d = sig.dom(a).index();
                        for u in 0..nd {
                            if rel[u][i][j] && rel[d][i][j] {
                                set(&mut rel, &mut changed, u, ext(&traces[i], a), ext(&traces[j], a));
                            }
                        }
                    }
                }
            }
            for r in rel.iter_mut() {
                for m in 0..n {
                    let via = r[m].clone();
                    for row in r.iter_mut().filter(|row| row[m]) {
                        for (cell, step) in row.iter_mut().zip(&via) {
                            if *step && !*cell {
                                *cell = true;
                                changed = true;
                            }
                        }
                    }
                }
            }
            if !changed {
                break;
            }
        }
        NaiveClosure { traces, index, rel }
    }

    pub fn related(&self, u: DomainId, a: &[ActionId], b: &[ActionId]) -> bool {
        self.rel[u.index()][self.index[a]][self.index[b]]
    }

    /// `D_{u,v}(u ↣ v)` at `t`: the edge holds at every world related to
    /// `t` by both relations. Worlds are the traces shorter than `k`
    /// together with `t` itself.
    pub fn knows_edge(&self, pes: &Pes, k: usize, t: &[ActionId], u: DomainId, v: DomainId) -> bool {
        let i = self.index[t];
        self.traces.iter().enumerate().all(|(j, w)| {
            let world = w.len() < k || j == i;
            !world
                || !(self.rel[u.index()][i][j] && self.rel[v.index()][i][j])
                || pes.edge(pes.run(w), u, v)
        })
    }
}

fn set(rel: &mut [Vec<Vec<bool>>], changed: &mut bool, u: usize, i: usize, j: usize) {
    if !rel[u][i][j] {
        rel[u][i][j] = true;
        rel[u][j][i] = true;
        *changed = true;
    }
}

/// Direct recursion for the purge trees: `cond(prefix, dom(a), u)` decides
/// whether the last action is recorded.
pub fn ta_oracle(
    pes: &Pes,
    trace: &[ActionId],
    u: DomainId,
    cond: &dyn Fn(&[ActionId], DomainId, DomainId) -> bool,
) -> Tree {
    match trace.split_last() {
        None => Tree::Leaf,
        Some((a, alpha)) => {
            let d = pes.signature().dom(*a);
            if cond(alpha, d, u) {
                Tree::Node(
                    Box::new(ta_oracle(pes, alpha, u, cond)),
                    Box::new(ta_oracle(pes, alpha, d, cond)),
                    *a,
                )
            } else {
                ta_oracle(pes, alpha, u, cond)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Capability-system properties.

use std::sync::Arc;

use dynflow::capability::{
    cap_step, CapAction, CapState, CapabilityConfig, DataAction, DataUpdate, Load, ProcessView,
    Store, TagUniverse,
};
use dynflow::gen::random_actions;
use rand::Rng;

/// A data action that mixes everything it can see into the message buffer
/// and the slots, and returns an update with one slot too many to probe
/// the structural confinement.
#[derive(Debug)]
pub struct Mixer;

impl DataAction for Mixer {
    fn name(&self) -> String {
        "mix".into()
    }

    fn apply(&self, view: &ProcessView) -> DataUpdate {
        let mut h: u64 = view.secrecy.0 ^ (view.caps.0 as u64).rotate_left(17);
        for m in view.inbox.iter().chain([&view.message]).chain(view.data) {
            h = h.wrapping_mul(0x100_0000_01b3) ^ m.map_or(7, |v| v as u64 + 1);
        }
        let pick = |x: u64| if x.is_multiple_of(3) { None } else { Some((x % 2) as u16) };
        let mut data: Vec<_> = view.data.iter().enumerate().map(|(i, _)| pick(h >> (3 * i))).collect();
        data.push(Some(1));
        DataUpdate {
            message: pick(h >> 11),
            data,
        }
    }
}

/// Three processes, two basic tags, two values, two data slots, the full
/// alphabet plus mixing, storing and loading for every process.
pub fn confinement_config() -> CapabilityConfig {
    let mut c = CapabilityConfig::new(&["p", "q", "r"], &["n", "k"], &["1", "2"]).unwrap();
    c.slots = vec!["x".into(), "y".into()];
    c.initial = CapState::empty(3, 2);
    for process in 0..3 {
        let actions: [Arc<dyn DataAction>; 3] = [
            Arc::new(Mixer),
            Arc::new(Store { slot: 0, label: "x".into() }),
            Arc::new(Load { slot: 1, label: "y".into() }),
        ];
        for action in actions {
            c.alphabet.push(CapAction::Data { process, action });
        }
    }
    c
}

fn has_cap(u: &TagUniverse, s: &CapState, p: usize, cap: dynflow::capability::Cap) -> bool {
    s.procs[p].caps.0 >> u.cap_bit(cap) & 1 == 1
}

/// Checks one step against the guard discipline: another process's inbox
/// and capability set change only through a send whose guard `S_p ⊆ S_q`
/// held before the step; the actor's own secrecy changes only with the
/// matching capability; the actor's outgoing edges shrink on `add_tag` and
/// grow on `remove_tag`.
pub fn check_guards(u: &TagUniverse, pre: &CapState, action: &CapAction, post: &CapState) -> Result<(), String> {
    let p = action.process();
    let name = action.name(u);
    let flows = |q: usize| pre.procs[p].secrecy.is_subset(pre.procs[q].secrecy);
    for q in 0..pre.procs.len() {
        let (a, b) = (&pre.procs[q], &post.procs[q]);
        if q != p {
            if a.secrecy != b.secrecy || a.message != b.message || a.data != b.data {
                return Err(format!("{name} changed private objects of process {q}"));
            }
            let inbox = a.inbox != b.inbox;
            let caps = a.caps != b.caps;
            let allowed_inbox = matches!(action, CapAction::SendMessage { to, .. } if *to == q) && flows(q);
            let allowed_caps = matches!(action, CapAction::SendCap { to, .. } if *to == q) && flows(q);
            if (inbox && !allowed_inbox) || (caps && !allowed_caps) {
                return Err(format!("{name} changed in/O of process {q} without the guard"));
            }
        } else if a.inbox != b.inbox {
            return Err(format!("{name} changed the actor's own inbox"));
        }
    }
    let (a, b) = (&pre.procs[p], &post.procs[p]);
    if a.secrecy != b.secrecy {
        let ok = match action {
            CapAction::AddTag { tag, .. } => has_cap(
                u,
                pre,
                p,
                dynflow::capability::Cap { tag: *tag, right: dynflow::capability::Right::Add },
            ),
            CapAction::RemoveTag { tag, .. } => has_cap(
                u,
                pre,
                p,
                dynflow::capability::Cap { tag: *tag, right: dynflow::capability::Right::Remove },
            ),
            _ => false,
        };
        if !ok {
            return Err(format!("{name} changed the secrecy set without the capability"));
        }
    }
    if a.caps != b.caps && !matches!(action, CapAction::AddCap { .. } | CapAction::DropCap { .. }) {
        return Err(format!("{name} changed the actor's capabilities"));
    }
    let out = |s: &CapState| -> Vec<bool> {
        (0..s.procs.len())
            .map(|q| s.procs[p].secrecy.is_subset(s.procs[q].secrecy))
            .collect()
    };
    let (before, after) = (out(pre), out(post));
    let shrinks = before.iter().zip(&after).all(|(x, y)| *x || !*y);
    let grows = before.iter().zip(&after).all(|(x, y)| !*x || *y);
    match action {
        CapAction::AddTag { .. } if !shrinks => Err(format!("{name} added outgoing edges")),
        CapAction::RemoveTag { .. } if !grows => Err(format!("{name} removed outgoing edges")),
        _ => Ok(()),
    }
}

/// Checks a data step: everything outside the actor's message and data
/// slots is identical, and the actor's result does not depend on other
/// processes' objects (the step is repeated with those perturbed).
pub fn check_confinement(
    u: &TagUniverse,
    pre: &CapState,
    action: &CapAction,
    post: &CapState,
    perturb: &mut impl Rng,
) -> Result<(), String> {
    let CapAction::Data { process: p, .. } = action else {
        return Ok(());
    };
    let p = *p;
    let name = action.name(u);
    for q in 0..pre.procs.len() {
        let (a, b) = (&pre.procs[q], &post.procs[q]);
        if q != p && a != b {
            return Err(format!("{name} changed process {q}"));
        }
    }
    let (a, b) = (&pre.procs[p], &post.procs[p]);
    if a.secrecy != b.secrecy || a.caps != b.caps || a.inbox != b.inbox {
        return Err(format!("{name} changed policy objects or the inbox"));
    }
    if b.data.len() != a.data.len() {
        return Err(format!("{name} changed the slot layout"));
    }
    let mut other = pre.clone();
    for q in (0..other.procs.len()).filter(|q| *q != p) {
        let st = &mut other.procs[q];
        st.secrecy.0 ^= perturb.gen::<u64>() & 0b1111;
        st.message = Some(perturb.gen_range(0..2));
        st.inbox.push(Some(perturb.gen_range(0..2)));
        for d in st.data.iter_mut() {
            *d = Some(perturb.gen_range(0..2));
        }
    }
    let again = cap_step(u, &other, action);
    if again.procs[p] != post.procs[p] {
        return Err(format!("{name} depends on another process's objects"));
    }
    Ok(())
}

/// Runs `sequences` random action sequences of length `len` on both the
/// bundled two-process configuration and [`confinement_config`], checking
/// every step. Returns the number of steps checked.
pub fn capability_properties(sequences: usize, len: usize, seed: u64) -> Result<usize, String> {
    let configs = [corpus::capability(), confinement_config()];
    let mut r = rng(seed);
    let mut steps = 0;
    for i in 0..sequences {
        let c = &configs[i % 2];
        let u = &c.universe;
        let mut state = c.initial.clone();
        for action in random_actions(&mut r, c, len) {
            let next = cap_step(u, &state, &action);
            check_guards(u, &state, &action, &next).map_err(|e| format!("sequence {i}: {e}"))?;
            check_confinement(u, &state, &action, &next, &mut r).map_err(|e| format!("sequence {i}: {e}"))?;
            state = next;
            steps += 1;
        }
    }
    Ok(steps)
}
