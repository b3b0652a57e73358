//! Information trees (`ta`, `ta◇`), perfect-recall views, and the generic
//! check "equal purge value implies equal observation".

use rustc_hash::FxHashMap;

use crate::model::{ActionId, DomainId, DomainSet, ObsId, Pes, Signature, StateId};
use crate::partition::TracePartition;
use crate::traces::TraceSpace;
use crate::tree::{TreeId, TreeStore, LEAF};
use crate::verdict::{Verdict, Witness};

/// A static (trace-independent) reflexive policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StaticPolicy {
    masks: Vec<u64>,
}

impl StaticPolicy {
    /// Builds a policy from its non-reflexive edges.
    pub fn from_pairs(sig: &Signature, pairs: &[(DomainId, DomainId)]) -> Self {
        let mut masks: Vec<u64> = sig.domains().map(|u| 1 << u.0).collect();
        for (u, v) in pairs {
            masks[u.index()] |= 1 << v.0;
        }
        StaticPolicy { masks }
    }

    /// The policy in force at one state of a system.
    pub fn at_state(pes: &Pes, s: StateId) -> Self {
        StaticPolicy {
            masks: pes.edge_row(s).to_vec(),
        }
    }

    pub fn allows(&self, u: DomainId, v: DomainId) -> bool {
        DomainSet(self.masks[u.index()]).contains(v)
    }
}

/// One tree per (domain, trace) of a trace space.
#[derive(Clone, Debug)]
pub struct PurgeTable {
    depth: usize,
    trees: Vec<Vec<TreeId>>,
}

impl PurgeTable {
    pub fn get(&self, u: DomainId, id: usize) -> TreeId {
        self.trees[u.index()][id]
    }

    pub fn column(&self, u: DomainId) -> &[TreeId] {
        &self.trees[u.index()]
    }

    /// The induced equivalences, one per domain.
    pub fn partitions(&self) -> Vec<TracePartition> {
        self.trees
            .iter()
            .enumerate()
            .map(|(u, col)| partition_by(DomainId(u as u16), self.depth, col))
            .collect()
    }
}

/// Builds trees bottom-up over a trace space. `cond(parent, actor,
/// observer)` decides whether the last action of a trace extending
/// `parent` is recorded for `observer`.
pub(crate) fn build_table(
    store: &mut TreeStore,
    sig: &Signature,
    space: &TraceSpace,
    mut cond: impl FnMut(usize, DomainId, DomainId) -> bool,
) -> PurgeTable {
    let nd = sig.domain_count();
    let mut trees: Vec<Vec<TreeId>> = (0..nd)
        .map(|_| {
            let mut v = Vec::with_capacity(space.len());
            v.push(LEAF);
            v
        })
        .collect();
    space.for_each_extension(|_, parent, a, _| {
        let d = sig.dom(a);
        let actor = trees[d.index()][parent];
        for (u, column) in trees.iter_mut().enumerate() {
            let prior = column[parent];
            let t = if cond(parent, d, DomainId(u as u16)) {
                store.node(prior, actor, a)
            } else {
                prior
            };
            column.push(t);
        }
    });
    PurgeTable {
        depth: space.depth(),
        trees,
    }
}

/// `ta` for every trace of the space under a static policy.
pub fn ta_static_table(
    store: &mut TreeStore,
    sig: &Signature,
    policy: &StaticPolicy,
    space: &TraceSpace,
) -> PurgeTable {
    build_table(store, sig, space, |_, d, u| policy.allows(d, u))
}

/// `ta◇` for every trace of the space: the branch condition is the edge in
/// the state reached by the prefix.
pub fn ta_may_table(store: &mut TreeStore, pes: &Pes, space: &TraceSpace) -> PurgeTable {
    build_table(store, pes.signature(), space, |parent, d, u| {
        pes.edge(space.state(parent), d, u)
    })
}

/// Folds a tree definition along a single trace, keeping the current tree
/// of every domain.
fn fold_trace(
    store: &mut TreeStore,
    sig: &Signature,
    trace: &[ActionId],
    mut cond: impl FnMut(usize, DomainId, DomainId) -> bool,
) -> Vec<TreeId> {
    let mut cur = vec![LEAF; sig.domain_count()];
    for (i, a) in trace.iter().enumerate() {
        let d = sig.dom(*a);
        let actor = cur[d.index()];
        cur = sig
            .domains()
            .map(|u| {
                if cond(i, d, u) {
                    store.node(cur[u.index()], actor, *a)
                } else {
                    cur[u.index()]
                }
            })
            .collect();
    }
    cur
}

/// `ta_u(α)` under a static policy.
pub fn ta_static(
    store: &mut TreeStore,
    sig: &Signature,
    policy: &StaticPolicy,
    trace: &[ActionId],
    u: DomainId,
) -> TreeId {
    fold_trace(store, sig, trace, |_, d, v| policy.allows(d, v))[u.index()]
}

/// `ta◇_u(α)`: the branch condition is the edge at the state reached by
/// the prefix.
pub fn ta_may(store: &mut TreeStore, pes: &Pes, trace: &[ActionId], u: DomainId) -> TreeId {
    let mut states = Vec::with_capacity(trace.len());
    let mut s = pes.initial();
    for a in trace {
        states.push(s);
        s = pes.step(s, *a);
    }
    fold_trace(store, pes.signature(), trace, |i, d, v| pes.edge(states[i], d, v))[u.index()]
}

/// An element of a view: an observation or one of the observer's actions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ViewItem {
    Obs(ObsId),
    Act(ActionId),
}

/// What a domain has seen: its initial observation, then its own actions
/// each followed by the resulting observation, with changes caused by other
/// domains appended only when they differ from the latest observation.
pub type View = Vec<ViewItem>;

/// `view_u(α)`.
pub fn view(pes: &Pes, trace: &[ActionId], u: DomainId) -> View {
    let sig = pes.signature();
    let mut s = pes.initial();
    let mut out = vec![ViewItem::Obs(pes.obs(s, u))];
    let mut last = pes.obs(s, u);
    for a in trace {
        s = pes.step(s, *a);
        let o = pes.obs(s, u);
        if sig.dom(*a) == u {
            out.push(ViewItem::Act(*a));
            out.push(ViewItem::Obs(o));
        } else if o != last {
            out.push(ViewItem::Obs(o));
        }
        last = o;
    }
    out
}

/// Renders a view as strings (action names and observation tokens).
pub fn render_view(pes: &Pes, v: &[ViewItem]) -> Vec<String> {
    v.iter()
        .map(|i| match i {
            ViewItem::Obs(o) => pes.obs_token(*o).to_string(),
            ViewItem::Act(a) => pes.signature().action_name(*a).to_string(),
        })
        .collect()
}

/// Interned views for every trace of a space: equal ids ⇔ equal views.
pub fn view_table(pes: &Pes, space: &TraceSpace) -> Vec<Vec<u32>> {
    const ROOT: u32 = u32::MAX;
    let sig = pes.signature();
    let mut index: FxHashMap<(u32, ViewItem), u32> = FxHashMap::default();
    let mut last_obs: Vec<ObsId> = Vec::new();
    let mut intern = |parent: u32, item: ViewItem, obs: ObsId| -> u32 {
        let next = last_obs.len() as u32;
        let id = *index.entry((parent, item)).or_insert(next);
        if id == next {
            last_obs.push(obs);
        }
        id
    };
    let mut table: Vec<Vec<u32>> = Vec::with_capacity(sig.domain_count());
    for u in sig.domains() {
        let mut col = Vec::with_capacity(space.len());
        let o = pes.obs(space.state(0), u);
        col.push(intern(ROOT, ViewItem::Obs(o), o));
        table.push(col);
    }
    let mut last_of: Vec<Vec<ObsId>> = sig
        .domains()
        .map(|u| vec![pes.obs(space.state(0), u)])
        .collect();
    space.for_each_extension(|id, parent, a, _| {
        let s = space.state(id);
        for u in sig.domains() {
            let (ui, o) = (u.index(), pes.obs(s, u));
            let p = table[ui][parent];
            let v = if sig.dom(a) == u {
                let mid = intern(p, ViewItem::Act(a), last_of[ui][parent]);
                intern(mid, ViewItem::Obs(o), o)
            } else if o == last_of[ui][parent] {
                p
            } else {
                intern(p, ViewItem::Obs(o), o)
            };
            table[ui].push(v);
            last_of[ui].push(o);
        }
    });
    table
}

/// Groups traces by equal tree.
pub fn partition_by(domain: DomainId, depth: usize, values: &[TreeId]) -> TracePartition {
    TracePartition::from_keys(domain, depth, values)
}

/// What [`check_f_security`] compares within a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// The final observation after each trace.
    FinalObs,
    /// The full view of each trace.
    View,
}

/// Observation keys `keys[u][id]` for the final-observation mode.
pub(crate) fn final_obs_keys(pes: &Pes, space: &TraceSpace) -> Vec<Vec<u32>> {
    pes.signature()
        .domains()
        .map(|u| space.states().iter().map(|s| pes.obs(*s, u).0).collect())
        .collect()
}

/// Checks that traces equivalent for a domain have equal observations
/// (or views) for it.
///
/// When the partitions carry merge logs (relations generated by rules),
/// the witness is the first merge, replayed per domain in domain order,
/// that joins two classes with different keys: a pair related by a single
/// rule application. Otherwise the witness is the shortlex-first trace
/// (domains in order) whose key differs from its class representative,
/// reported as `(representative, trace, domain)`.
pub fn check_f_security(
    property: &str,
    partitions: &[TracePartition],
    pes: &Pes,
    space: &TraceSpace,
    mode: Mode,
) -> Verdict {
    let keys = match mode {
        Mode::FinalObs => final_obs_keys(pes, space),
        Mode::View => view_table(pes, space),
    };
    let witness = find_key_conflict(partitions, &keys);
    let sig = pes.signature();
    Verdict::bounded(
        property,
        space.depth(),
        witness.map(|(x, y, u)| Witness::trace_pair(sig, &space.trace(x), &space.trace(y), u)),
    )
}

pub(crate) fn find_key_conflict(
    partitions: &[TracePartition],
    keys: &[Vec<u32>],
) -> Option<(usize, usize, DomainId)> {
    if !partitions.is_empty() && partitions.iter().all(|p| p.merge_log().is_some()) {
        for p in partitions {
            let key = &keys[p.domain().index()];
            let mut uf = crate::partition::UnionFind::new(p.len());
            for (x, y) in p.merge_log().unwrap_or_default() {
                let (rx, ry) = (uf.find(*x), uf.find(*y));
                if key[rx as usize] != key[ry as usize] {
                    return Some((*x as usize, *y as usize, p.domain()));
                }
                uf.union(rx, ry);
            }
        }
        return None;
    }
    let n = partitions.first().map_or(0, |p| p.len());
    for id in 0..n {
        for p in partitions {
            let key = &keys[p.domain().index()];
            let r = p.rep(id);
            if key[r] != key[id] {
                return Some((r, id, p.domain()));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn tr(pes: &Pes, t: &str) -> Vec<ActionId> {
        pes.signature().parse_trace(t).unwrap()
    }

    #[test]
    fn figure1_trees() {
        let pes = corpus::figure1();
        let sig = pes.signature();
        let b = sig.domain_id("B").unwrap();
        let mut st = TreeStore::new();
        let t = ta_may(&mut st, &pes, &tr(&pes, "pa"), b);
        assert_eq!(st.render(t, sig), "(e,e,a)");
        assert_eq!(ta_may(&mut st, &pes, &tr(&pes, "p"), b), LEAF);
    }

    #[test]
    fn figure4_prime_trees_coincide() {
        let pes = corpus::figure4(true);
        let sig = pes.signature();
        let b = sig.domain_id("B").unwrap();
        let mut st = TreeStore::new();
        let x = ta_may(&mut st, &pes, &tr(&pes, "aba"), b);
        let y = ta_may(&mut st, &pes, &tr(&pes, "baa"), b);
        assert_eq!(x, y);
        assert_eq!(st.render(x, sig), "((e,e,b),(e,e,a),a)");
    }

    #[test]
    fn static_trees() {
        let sig = Signature::new(["A", "B"], [("a", "A"), ("b", "B")]).unwrap();
        let (a, b) = (DomainId(0), DomainId(1));
        let mut st = TreeStore::new();
        let open = StaticPolicy::from_pairs(&sig, &[(a, b)]);
        let t = ta_static(&mut st, &sig, &open, &sig.parse_trace("ab").unwrap(), b);
        assert_eq!(st.render(t, &sig), "((e,e,a),(e,e,a),b)");
        let closed = StaticPolicy::from_pairs(&sig, &[]);
        assert_eq!(ta_static(&mut st, &sig, &closed, &[ActionId(0)], b), LEAF);
        assert_eq!(ta_static(&mut st, &sig, &open, &[], a), LEAF);
    }

    #[test]
    fn figure1_views() {
        let pes = corpus::figure1();
        let b = pes.signature().domain_id("B").unwrap();
        let show = |t: &str| render_view(&pes, &view(&pes, &tr(&pes, t), b));
        assert_eq!(show(""), vec!["0"]);
        assert_eq!(show("p"), vec!["0"]);
        assert_eq!(show("pa"), vec!["0", "1"]);
    }

    #[test]
    fn view_table_matches_direct_views() {
        for (_, pes) in corpus::systems() {
            let space = TraceSpace::new(&pes, 4).unwrap();
            let table = view_table(&pes, &space);
            for u in pes.signature().domains() {
                let mut by_id: FxHashMap<u32, View> = FxHashMap::default();
                for (id, key) in table[u.index()].iter().enumerate() {
                    let v = view(&pes, &space.trace(id), u);
                    let prev = by_id.entry(*key).or_insert_with(|| v.clone());
                    assert_eq!(*prev, v);
                }
                let distinct: std::collections::HashSet<View> =
                    (0..space.len()).map(|id| view(&pes, &space.trace(id), u)).collect();
                assert_eq!(distinct.len(), by_id.len());
            }
        }
    }

    #[test]
    fn figure1_may_partition_at_depth_two() {
        let pes = corpus::figure1();
        let space = TraceSpace::new(&pes, 2).unwrap();
        let mut st = TreeStore::new();
        let table = ta_may_table(&mut st, &pes, &space);
        let b = pes.signature().domain_id("B").unwrap();
        let part = partition_by(b, 2, table.column(b));
        let names: Vec<Vec<String>> = part
            .classes(space.len())
            .into_iter()
            .map(|c| c.into_iter().map(|id| pes.signature().format_trace(&space.trace(id))).collect())
            .collect();
        assert_eq!(
            names,
            vec![
                vec!["ε", "p", "a", "p.p", "a.p", "a.a"],
                vec!["p.a"],
            ]
        );
    }
}
