//! Enumeration of every trace up to a depth bound.
//!
//! Traces are numbered in shortlex order: by length, then lexicographically
//! by action declaration order. Because every state has a successor under
//! every action, the traces of length `L` form a complete `|A|`-ary level, so
//! parents and children are computed arithmetically and the only per-trace
//! storage is the state each trace reaches.

use crate::error::{Error, Result};
use crate::model::{ActionId, Pes, StateId, Trace};

/// Hard cap on the number of enumerated traces.
pub const MAX_TRACES: u128 = 1 << 27;

/// All traces of length at most `depth` from a start state.
#[derive(Clone, Debug)]
pub struct TraceSpace {
    depth: usize,
    actions: usize,
    /// `offsets[L]` is the id of the first trace of length `L`;
    /// `offsets[depth + 1]` is the total count.
    offsets: Vec<usize>,
    states: Vec<StateId>,
    start: StateId,
}

/// Number of traces of length at most `depth` over `actions` actions.
pub fn trace_count(actions: usize, depth: usize) -> u128 {
    let mut total: u128 = 0;
    let mut level: u128 = 1;
    for _ in 0..=depth {
        total = total.saturating_add(level);
        level = level.saturating_mul(actions as u128);
    }
    total
}

impl TraceSpace {
    /// Traces from the initial state.
    pub fn new(pes: &Pes, depth: usize) -> Result<Self> {
        Self::from_state(pes, pes.initial(), depth)
    }

    /// Traces from an arbitrary state.
    pub fn from_state(pes: &Pes, start: StateId, depth: usize) -> Result<Self> {
        let na = pes.signature().action_count();
        let total = trace_count(na, depth);
        if total > MAX_TRACES {
            return Err(Error::TooLarge {
                traces: total,
                depth,
            });
        }
        let mut offsets = Vec::with_capacity(depth + 2);
        let mut level = 1usize;
        let mut acc = 0usize;
        for _ in 0..=depth {
            offsets.push(acc);
            acc += level;
            level *= na;
        }
        offsets.push(acc);
        let mut states = Vec::with_capacity(acc);
        states.push(start);
        for l in 1..=depth {
            for parent in offsets[l - 1]..offsets[l] {
                let s = states[parent];
                for a in 0..na {
                    states.push(pes.step(s, ActionId(a as u16)));
                }
            }
        }
        Ok(TraceSpace {
            depth,
            actions: na,
            offsets,
            states,
            start,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn start(&self) -> StateId {
        self.start
    }

    /// Total number of traces.
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Number of traces of length at most `length` (all ids below it).
    pub fn count_upto(&self, length: usize) -> usize {
        self.offsets[length.min(self.depth) + 1]
    }

    /// Number of traces strictly shorter than the bound: exactly these have
    /// one-step extensions inside the space.
    pub fn interior(&self) -> usize {
        self.offsets[self.depth]
    }

    /// Ids of traces of a given length.
    pub fn level(&self, length: usize) -> std::ops::Range<usize> {
        self.offsets[length]..self.offsets[length + 1]
    }

    /// Length of the trace with the given id.
    pub fn length(&self, id: usize) -> usize {
        match self.offsets.binary_search(&id) {
            Ok(l) => {
                // Empty levels (no actions) share an offset; pick the first.
                let mut l = l;
                while l + 1 < self.offsets.len() && self.offsets[l + 1] == id {
                    l += 1;
                }
                l.min(self.depth)
            }
            Err(l) => l - 1,
        }
    }

    /// State reached by the trace.
    pub fn state(&self, id: usize) -> StateId {
        self.states[id]
    }

    pub fn states(&self) -> &[StateId] {
        &self.states
    }

    /// The trace's one-step prefix and final action (`None` for ε).
    pub fn split_last(&self, id: usize) -> Option<(usize, ActionId)> {
        let l = self.length(id);
        if l == 0 {
            return None;
        }
        let idx = id - self.offsets[l];
        Some((
            self.offsets[l - 1] + idx / self.actions,
            ActionId((idx % self.actions) as u16),
        ))
    }

    /// Id of the one-step extension, if it is within the bound.
    pub fn child(&self, id: usize, a: ActionId) -> Option<usize> {
        let l = self.length(id);
        (l < self.depth).then(|| self.child_at(l, id, a))
    }

    /// Id of the one-step extension of a trace known to have length `l < depth`.
    pub fn child_at(&self, l: usize, id: usize, a: ActionId) -> usize {
        self.offsets[l + 1] + (id - self.offsets[l]) * self.actions + a.index()
    }

    /// The trace itself.
    pub fn trace(&self, id: usize) -> Trace {
        let mut out = Vec::with_capacity(self.length(id));
        let mut cur = id;
        while let Some((parent, a)) = self.split_last(cur) {
            out.push(a);
            cur = parent;
        }
        out.reverse();
        out
    }

    /// Id of a trace, if it is within the bound.
    pub fn id_of(&self, trace: &[ActionId]) -> Option<usize> {
        if trace.len() > self.depth || trace.iter().any(|a| a.index() >= self.actions) {
            return None;
        }
        let mut idx = 0usize;
        for a in trace {
            idx = idx * self.actions + a.index();
        }
        Some(self.offsets[trace.len()] + idx)
    }

    /// Like [`TraceSpace::id_of`], but reports a bound error.
    pub fn require(&self, trace: &[ActionId]) -> Result<usize> {
        self.id_of(trace).ok_or(Error::BoundExceeded {
            length: trace.len(),
            depth: self.depth,
        })
    }

    /// Calls `f(id, parent, action, length)` for every non-empty trace, in
    /// shortlex order (so parents are always visited first).
    pub fn for_each_extension(&self, mut f: impl FnMut(usize, usize, ActionId, usize)) {
        for l in 1..=self.depth {
            let mut id = self.offsets[l];
            for parent in self.offsets[l - 1]..self.offsets[l] {
                for a in 0..self.actions {
                    f(id, parent, ActionId(a as u16), l);
                    id += 1;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    #[test]
    fn shortlex_numbering_round_trips() {
        let pes = corpus::figure1();
        let space = TraceSpace::new(&pes, 3).unwrap();
        assert_eq!(space.len(), 1 + 2 + 4 + 8);
        assert_eq!(space.interior(), 7);
        for id in 0..space.len() {
            let t = space.trace(id);
            assert_eq!(space.id_of(&t), Some(id));
            assert_eq!(space.length(id), t.len());
            assert_eq!(space.state(id), pes.run(&t));
        }
        let ids: Vec<Trace> = (0..space.len()).map(|i| space.trace(i)).collect();
        let mut sorted = ids.clone();
        sorted.sort_by(|x, y| x.len().cmp(&y.len()).then(x.cmp(y)));
        assert_eq!(ids, sorted);
    }

    #[test]
    fn no_actions_gives_only_the_empty_trace() {
        use crate::model::{PesBuilder, Signature};
        let sig = Signature::new(["A"], Vec::<(&str, &str)>::new()).unwrap();
        let mut b = PesBuilder::new(sig, ["s"]).unwrap();
        b.initial(StateId(0)).default_obs(crate::model::DomainId(0), "0");
        let pes = b.build().unwrap();
        let space = TraceSpace::new(&pes, 4).unwrap();
        assert_eq!(space.len(), 1);
        assert_eq!(space.length(0), 0);
        assert_eq!(space.split_last(0), None);
    }

    #[test]
    fn oversized_space_is_rejected() {
        assert_eq!(trace_count(2, 3), 15);
        let pes = corpus::figure1();
        assert!(matches!(
            TraceSpace::new(&pes, 40),
            Err(Error::TooLarge { .. })
        ));
    }
}
