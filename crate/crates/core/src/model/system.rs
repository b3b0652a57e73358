//! Policy-enhanced systems: deterministic, input-enabled automata carrying
//! per-state observations for every domain and a per-state reflexive policy.

use std::collections::{HashMap, VecDeque};

use serde::Serialize;

use super::signature::{ActionId, DomainId, DomainSet, Signature};
use crate::error::{Error, Result};

/// Index of a state within its system.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct StateId(pub u32);

impl StateId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Interned observation token. Only equality is meaningful.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ObsId(pub u32);

/// Interner for opaque observation tokens.
#[derive(Clone, Debug, Default)]
pub(crate) struct ObsTable {
    values: Vec<String>,
    index: HashMap<String, ObsId>,
}

impl ObsTable {
    pub(crate) fn intern(&mut self, value: &str) -> ObsId {
        if let Some(id) = self.index.get(value) {
            return *id;
        }
        let id = ObsId(self.values.len() as u32);
        self.values.push(value.to_string());
        self.index.insert(value.to_string(), id);
        id
    }

    pub(crate) fn get(&self, id: ObsId) -> &str {
        &self.values[id.0 as usize]
    }
}

/// A finite policy-enhanced system.
///
/// Transitions, observations and edges are dense tables indexed by state.
/// Policy edges are stored as one bitmask per (state, source domain); the
/// reflexive bit is always set, so queries never need to special-case it.
#[derive(Clone, Debug)]
pub struct Pes {
    sig: Signature,
    state_names: Vec<String>,
    initial: StateId,
    trans: Vec<StateId>,
    obs: Vec<ObsId>,
    obs_table: ObsTable,
    edges: Vec<u64>,
    truncated_at: Option<usize>,
    frontier: Vec<bool>,
}

impl PartialEq for Pes {
    /// Structural equality; observation tokens are compared by value, so
    /// systems whose interners were filled in different orders compare equal.
    fn eq(&self, other: &Self) -> bool {
        self.sig == other.sig
            && self.state_names == other.state_names
            && self.initial == other.initial
            && self.trans == other.trans
            && self.edges == other.edges
            && self.truncated_at == other.truncated_at
            && self.frontier == other.frontier
            && self.obs.len() == other.obs.len()
            && self
                .obs
                .iter()
                .zip(&other.obs)
                .all(|(x, y)| self.obs_table.get(*x) == other.obs_table.get(*y))
    }
}

impl Eq for Pes {}

impl Pes {
    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn state_count(&self) -> usize {
        self.state_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.state_names.len() as u32).map(StateId)
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_name(&self, s: StateId) -> &str {
        &self.state_names[s.index()]
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_names
            .iter()
            .position(|n| n == name)
            .map(|i| StateId(i as u32))
            .ok_or_else(|| Error::unknown("state", name))
    }

    /// `s·a`, the unique successor of `s` under `a`.
    pub fn step(&self, s: StateId, a: ActionId) -> StateId {
        self.trans[s.index() * self.sig.action_count() + a.index()]
    }

    /// `s·α`, the state reached by executing a trace from `s`.
    pub fn run_from(&self, s: StateId, trace: &[ActionId]) -> StateId {
        trace.iter().fold(s, |s, a| self.step(s, *a))
    }

    /// `s0·α`.
    pub fn run(&self, trace: &[ActionId]) -> StateId {
        self.run_from(self.initial, trace)
    }

    /// Name-checked variant of [`Pes::step`].
    pub fn step_named(&self, state: &str, action: &str) -> Result<StateId> {
        let s = self.state_id(state)?;
        let a = self.sig.action_id(action)?;
        Ok(self.step(s, a))
    }

    pub fn obs(&self, s: StateId, u: DomainId) -> ObsId {
        self.obs[s.index() * self.sig.domain_count() + u.index()]
    }

    pub fn obs_value(&self, s: StateId, u: DomainId) -> &str {
        self.obs_table.get(self.obs(s, u))
    }

    pub fn obs_token(&self, id: ObsId) -> &str {
        self.obs_table.get(id)
    }

    /// `s ⊨ u ↣ v`. Always true when `u = v`.
    pub fn edge(&self, s: StateId, u: DomainId, v: DomainId) -> bool {
        self.edge_mask(s, u).contains(v)
    }

    /// All `v` with `s ⊨ u ↣ v`, including `u` itself.
    pub fn edge_mask(&self, s: StateId, u: DomainId) -> DomainSet {
        DomainSet(self.edges[s.index() * self.sig.domain_count() + u.index()])
    }

    /// Non-reflexive edges at a state, in domain order.
    pub fn edges_at(&self, s: StateId) -> Vec<(DomainId, DomainId)> {
        let mut out = Vec::new();
        for u in self.sig.domains() {
            for v in self.edge_mask(s, u).iter() {
                if u != v {
                    out.push((u, v));
                }
            }
        }
        out
    }

    /// Raw edge masks of a state, one per source domain.
    pub(crate) fn edge_row(&self, s: StateId) -> &[u64] {
        let n = self.sig.domain_count();
        &self.edges[s.index() * n..(s.index() + 1) * n]
    }

    /// The depth at which this system was cut, if it is a truncated unfold
    /// or a bounded exploration.
    pub fn truncated_at(&self) -> Option<usize> {
        self.truncated_at
    }

    /// True when the outgoing transitions of `s` are truncation self-loops
    /// rather than genuine behaviour.
    pub fn is_frontier(&self, s: StateId) -> bool {
        self.frontier[s.index()]
    }

    /// Reachable states in breadth-first order (actions in declaration
    /// order), so the initial state comes first.
    pub fn reachable_states(&self) -> Vec<StateId> {
        self.reachable_within(usize::MAX)
            .into_iter()
            .map(|(s, _)| s)
            .collect()
    }

    /// States reachable by traces of length at most `depth`, paired with
    /// the length of the shortest such trace, in breadth-first order.
    pub fn reachable_within(&self, depth: usize) -> Vec<(StateId, usize)> {
        let mut seen = vec![false; self.state_count()];
        let mut order = Vec::new();
        let mut queue = VecDeque::new();
        seen[self.initial.index()] = true;
        queue.push_back((self.initial, 0));
        while let Some((s, d)) = queue.pop_front() {
            order.push((s, d));
            if d == depth {
                continue;
            }
            for a in self.sig.actions() {
                let t = self.step(s, a);
                if !seen[t.index()] {
                    seen[t.index()] = true;
                    queue.push_back((t, d + 1));
                }
            }
        }
        order
    }

    /// A copy with the policy replaced: `edges(s, u)` gives the targets of
    /// `u` at `s` (the reflexive edge is added automatically).
    pub fn with_policy(&self, mut edges: impl FnMut(StateId, DomainId) -> DomainSet) -> Pes {
        let mut out = self.clone();
        let n = self.sig.domain_count();
        for s in self.states() {
            for u in self.sig.domains() {
                out.edges[s.index() * n + u.index()] = edges(s, u).0 | 1 << u.0;
            }
        }
        out
    }

    /// A copy without edges leaving domains that perform no action, and
    /// the list of domains whose edges were removed.
    pub fn without_inactive_edges(&self) -> (Pes, Vec<DomainId>) {
        let active = self.sig.active_domains();
        let mut stripped = Vec::new();
        for u in self.sig.domains() {
            if !active.contains(u)
                && self
                    .states()
                    .any(|s| self.edge_mask(s, u) != DomainSet::singleton(u))
            {
                stripped.push(u);
            }
        }
        let out = self.with_policy(|s, u| {
            if active.contains(u) {
                self.edge_mask(s, u)
            } else {
                DomainSet::EMPTY
            }
        });
        (out, stripped)
    }

    /// The machine component (everything but the policy).
    pub fn machine(&self) -> Machine {
        Machine {
            sig: self.sig.clone(),
            state_names: self.state_names.clone(),
            initial: self.initial,
            trans: self.trans.clone(),
            obs: self
                .obs
                .iter()
                .map(|o| self.obs_table.get(*o).to_string())
                .collect(),
        }
    }

    /// The policy component viewed as an automaton over the same states.
    pub fn policy(&self) -> PolicyAutomaton {
        PolicyAutomaton {
            sig: self.sig.clone(),
            state_names: self.state_names.clone(),
            initial: self.initial,
            trans: self.trans.clone(),
            edges: self.edges.clone(),
        }
    }
}

/// Incremental construction of a [`Pes`] with validation.
#[derive(Clone, Debug)]
pub struct PesBuilder {
    sig: Signature,
    state_names: Vec<String>,
    state_index: HashMap<String, StateId>,
    initial: Option<StateId>,
    trans: Vec<Option<StateId>>,
    obs: Vec<Option<ObsId>>,
    obs_table: ObsTable,
    edges: Vec<u64>,
    truncated_at: Option<usize>,
    frontier: Vec<bool>,
}

impl PesBuilder {
    pub fn new<S: Into<String>>(sig: Signature, states: impl IntoIterator<Item = S>) -> Result<Self> {
        let state_names: Vec<String> = states.into_iter().map(Into::into).collect();
        if state_names.is_empty() {
            return Err(Error::InvalidSystem("a system needs at least one state".into()));
        }
        if state_names.len() > u32::MAX as usize {
            return Err(Error::InvalidSystem("too many states".into()));
        }
        let mut state_index = HashMap::new();
        for (i, n) in state_names.iter().enumerate() {
            if state_index.insert(n.clone(), StateId(i as u32)).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate state `{n}`")));
            }
        }
        let n = state_names.len();
        let (na, nd) = (sig.action_count(), sig.domain_count());
        let mut edges = vec![0u64; n * nd];
        for s in 0..n {
            for u in 0..nd {
                edges[s * nd + u] = 1 << u;
            }
        }
        Ok(PesBuilder {
            sig,
            state_names,
            state_index,
            initial: None,
            trans: vec![None; n * na],
            obs: vec![None; n * nd],
            obs_table: ObsTable::default(),
            edges,
            truncated_at: None,
            frontier: vec![false; n],
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn state_id(&self, name: &str) -> Result<StateId> {
        self.state_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::unknown("state", name))
    }

    pub fn initial(&mut self, s: StateId) -> &mut Self {
        self.initial = Some(s);
        self
    }

    /// Declares `s·a = t`. Declaring a different target twice is a
    /// determinism violation.
    pub fn transition(&mut self, s: StateId, a: ActionId, t: StateId) -> Result<&mut Self> {
        let slot = &mut self.trans[s.index() * self.sig.action_count() + a.index()];
        match slot {
            Some(old) if *old != t => {
                return Err(Error::InvalidSystem(format!(
                    "nondeterministic transition: {} -{}-> {} and {}",
                    self.state_names[s.index()],
                    self.sig.action_name(a),
                    self.state_names[old.index()],
                    self.state_names[t.index()]
                )))
            }
            _ => *slot = Some(t),
        }
        Ok(self)
    }

    pub fn obs(&mut self, s: StateId, u: DomainId, value: &str) -> &mut Self {
        let id = self.obs_table.intern(value);
        self.obs[s.index() * self.sig.domain_count() + u.index()] = Some(id);
        self
    }

    /// Sets the same observation for `u` in every state not yet assigned.
    pub fn default_obs(&mut self, u: DomainId, value: &str) -> &mut Self {
        let id = self.obs_table.intern(value);
        let nd = self.sig.domain_count();
        for s in 0..self.state_names.len() {
            let slot = &mut self.obs[s * nd + u.index()];
            if slot.is_none() {
                *slot = Some(id);
            }
        }
        self
    }

    pub fn edge(&mut self, s: StateId, u: DomainId, v: DomainId) -> &mut Self {
        self.edges[s.index() * self.sig.domain_count() + u.index()] |= 1 << v.0;
        self
    }

    pub fn remove_edge(&mut self, s: StateId, u: DomainId, v: DomainId) -> &mut Self {
        if u != v {
            self.edges[s.index() * self.sig.domain_count() + u.index()] &= !(1 << v.0);
        }
        self
    }

    pub(crate) fn truncated(&mut self, depth: usize, frontier: Vec<bool>) -> &mut Self {
        self.truncated_at = Some(depth);
        self.frontier = frontier;
        self
    }

    /// Finishes construction. Undeclared transitions become self-loops; a
    /// missing observation is an error.
    pub fn build(self) -> Result<Pes> {
        let (na, nd) = (self.sig.action_count(), self.sig.domain_count());
        let initial = self
            .initial
            .ok_or_else(|| Error::InvalidSystem("no initial state".into()))?;
        let trans = self
            .trans
            .iter()
            .enumerate()
            .map(|(i, t)| t.unwrap_or(StateId((i / na.max(1)) as u32)))
            .collect();
        let mut obs = Vec::with_capacity(self.obs.len());
        for (i, o) in self.obs.iter().enumerate() {
            match o {
                Some(o) => obs.push(*o),
                None => {
                    return Err(Error::InvalidSystem(format!(
                        "no observation for domain {} in state {}",
                        self.sig.domain_name(DomainId((i % nd) as u16)),
                        self.state_names[i / nd]
                    )))
                }
            }
        }
        Ok(Pes {
            sig: self.sig,
            state_names: self.state_names,
            initial,
            trans,
            obs,
            obs_table: self.obs_table,
            edges: self.edges,
            truncated_at: self.truncated_at,
            frontier: self.frontier,
        })
    }
}

/// A system without a policy: states, transitions and observations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Machine {
    pub sig: Signature,
    pub state_names: Vec<String>,
    pub initial: StateId,
    /// `trans[s * |A| + a]`.
    pub trans: Vec<StateId>,
    /// `obs[s * |D| + u]`.
    pub obs: Vec<String>,
}

/// A dynamic policy presented as a deterministic automaton whose states
/// carry reflexive edge relations.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PolicyAutomaton {
    pub sig: Signature,
    pub state_names: Vec<String>,
    pub initial: StateId,
    /// `trans[s * |A| + a]`.
    pub trans: Vec<StateId>,
    /// `edges[s * |D| + u]` is the bitmask of targets of `u`.
    pub edges: Vec<u64>,
}

impl Machine {
    pub fn step(&self, s: StateId, a: ActionId) -> StateId {
        self.trans[s.index() * self.sig.action_count() + a.index()]
    }

    pub fn run(&self, trace: &[ActionId]) -> StateId {
        trace.iter().fold(self.initial, |s, a| self.step(s, *a))
    }

    pub fn obs(&self, s: StateId, u: DomainId) -> &str {
        &self.obs[s.index() * self.sig.domain_count() + u.index()]
    }

    fn validate(&self) -> Result<()> {
        let n = self.state_names.len();
        if n == 0
            || self.trans.len() != n * self.sig.action_count()
            || self.obs.len() != n * self.sig.domain_count()
            || self.initial.index() >= n
            || self.trans.iter().any(|t| t.index() >= n)
        {
            return Err(Error::InvalidSystem("malformed machine tables".into()));
        }
        Ok(())
    }
}

impl PolicyAutomaton {
    pub fn step(&self, s: StateId, a: ActionId) -> StateId {
        self.trans[s.index() * self.sig.action_count() + a.index()]
    }

    pub fn run(&self, trace: &[ActionId]) -> StateId {
        trace.iter().fold(self.initial, |s, a| self.step(s, *a))
    }

    pub fn edge_mask(&self, s: StateId, u: DomainId) -> DomainSet {
        DomainSet(self.edges[s.index() * self.sig.domain_count() + u.index()] | 1 << u.0)
    }

    fn validate(&self) -> Result<()> {
        let n = self.state_names.len();
        if n == 0
            || self.trans.len() != n * self.sig.action_count()
            || self.edges.len() != n * self.sig.domain_count()
            || self.initial.index() >= n
            || self.trans.iter().any(|t| t.index() >= n)
        {
            return Err(Error::InvalidSystem("malformed policy automaton tables".into()));
        }
        Ok(())
    }
}

/// The synchronous product of a machine and a policy automaton: states are
/// pairs, observations come from the machine and edges from the policy.
/// State `(m, p)` gets index `m * |P| + p` and the name `(m,p)`.
pub fn encode(machine: &Machine, policy: &PolicyAutomaton) -> Result<Pes> {
    if machine.sig != policy.sig {
        return Err(Error::SignatureMismatch(format!(
            "machine has {}, policy has {}",
            machine.sig, policy.sig
        )));
    }
    machine.validate()?;
    policy.validate()?;
    let sig = machine.sig.clone();
    let (nm, np) = (machine.state_names.len(), policy.state_names.len());
    let pair = |m: StateId, p: StateId| StateId((m.index() * np + p.index()) as u32);
    let mut names = Vec::with_capacity(nm * np);
    for m in &machine.state_names {
        for p in &policy.state_names {
            names.push(format!("({m},{p})"));
        }
    }
    let mut b = PesBuilder::new(sig.clone(), names)?;
    b.initial(pair(machine.initial, policy.initial));
    for m in 0..nm as u32 {
        for p in 0..np as u32 {
            let (m, p) = (StateId(m), StateId(p));
            let s = pair(m, p);
            for a in sig.actions() {
                b.transition(s, a, pair(machine.step(m, a), policy.step(p, a)))?;
            }
            for u in sig.domains() {
                b.obs(s, u, machine.obs(m, u));
                for v in policy.edge_mask(p, u).iter() {
                    b.edge(s, u, v);
                }
            }
        }
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Pes {
        let sig = Signature::new(["H", "L"], [("h", "H")]).unwrap();
        let mut b = PesBuilder::new(sig, ["s0", "s1"]).unwrap();
        let (s0, s1) = (StateId(0), StateId(1));
        b.initial(s0);
        b.transition(s0, ActionId(0), s1).unwrap();
        b.default_obs(DomainId(0), "0").default_obs(DomainId(1), "0");
        b.obs(s1, DomainId(1), "1");
        b.edge(s0, DomainId(0), DomainId(1));
        b.build().unwrap()
    }

    #[test]
    fn missing_transitions_are_self_loops() {
        let m = two_state();
        assert_eq!(m.step(StateId(1), ActionId(0)), StateId(1));
        assert_eq!(m.run(&[ActionId(0), ActionId(0)]), StateId(1));
    }

    #[test]
    fn reflexive_edges_are_implicit() {
        let m = two_state();
        for s in m.states() {
            for u in m.signature().domains() {
                assert!(m.edge(s, u, u));
            }
        }
        assert!(m.edge(StateId(0), DomainId(0), DomainId(1)));
        assert!(!m.edge(StateId(1), DomainId(0), DomainId(1)));
        assert_eq!(m.edges_at(StateId(0)), vec![(DomainId(0), DomainId(1))]);
    }

    #[test]
    fn conflicting_transition_is_rejected() {
        let sig = Signature::new(["A"], [("a", "A")]).unwrap();
        let mut b = PesBuilder::new(sig, ["s0", "s1", "s2"]).unwrap();
        b.transition(StateId(0), ActionId(0), StateId(1)).unwrap();
        assert!(b.transition(StateId(0), ActionId(0), StateId(1)).is_ok());
        assert!(b.transition(StateId(0), ActionId(0), StateId(2)).is_err());
    }

    #[test]
    fn missing_observation_is_rejected() {
        let sig = Signature::new(["A"], [("a", "A")]).unwrap();
        let mut b = PesBuilder::new(sig, ["s0"]).unwrap();
        b.initial(StateId(0));
        assert!(matches!(b.build(), Err(Error::InvalidSystem(_))));
    }

    #[test]
    fn inactive_edges_are_stripped() {
        let sig = Signature::new(["H", "L"], [("h", "H")]).unwrap();
        let mut b = PesBuilder::new(sig, ["s0"]).unwrap();
        b.initial(StateId(0));
        b.default_obs(DomainId(0), "0").default_obs(DomainId(1), "0");
        b.edge(StateId(0), DomainId(1), DomainId(0));
        let m = b.build().unwrap();
        let (n, stripped) = m.without_inactive_edges();
        assert_eq!(stripped, vec![DomainId(1)]);
        assert!(!n.edge(StateId(0), DomainId(1), DomainId(0)));
        assert!(n.edge(StateId(0), DomainId(1), DomainId(1)));
    }

    #[test]
    fn one_state_product() {
        let m = two_state();
        let sig = m.signature().clone();
        let machine = Machine {
            sig: sig.clone(),
            state_names: vec!["m".into()],
            initial: StateId(0),
            trans: vec![StateId(0)],
            obs: vec!["x".into(), "y".into()],
        };
        let policy = PolicyAutomaton {
            sig,
            state_names: vec!["q".into()],
            initial: StateId(0),
            trans: vec![StateId(0)],
            edges: vec![0b10, 0],
        };
        let p = encode(&machine, &policy).unwrap();
        assert_eq!(p.state_count(), 1);
        assert!(p.edge(StateId(0), DomainId(0), DomainId(1)));
        assert!(!p.edge(StateId(0), DomainId(1), DomainId(0)));
        assert_eq!(p.obs_value(StateId(0), DomainId(1)), "y");
    }

    #[test]
    fn product_rejects_signature_mismatch() {
        let m = two_state().machine();
        let other = Signature::new(["H", "L"], [("x", "H")]).unwrap();
        let policy = PolicyAutomaton {
            sig: other,
            state_names: vec!["q".into()],
            initial: StateId(0),
            trans: vec![StateId(0)],
            edges: vec![0, 0],
        };
        assert!(matches!(encode(&m, &policy), Err(Error::SignatureMismatch(_))));
    }
}
