//! Bounded unwinding relations, distributed knowledge over them, `ta□`
//! trees, and the cross-check that `ta□`-equality coincides with the
//! unwinding relations.
//!
//! The relations are the least per-domain equivalences on traces up to the
//! bound closed under
//!
//! * **DLR**: if `run(α) ⊨ dom(a) ̸↣ u` then `αa ∼_u α`;
//! * **WSC**: if `α ∼_u β` and `α ∼_dom(a) β` then `αa ∼_u βa`.
//!
//! Distributed knowledge is evaluated over a bounded set of worlds: the
//! traces strictly shorter than the bound (those whose one-step extensions
//! are enumerated), plus the evaluation point itself. With this choice the
//! identity between `ta□`-equality and the bounded unwinding relations holds
//! exactly on every enumerated trace: every rule application the identity
//! needs stays inside the bound.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::Result;
use crate::model::{ActionId, DomainId, DomainSet, Pes};
use crate::partition::{TracePartition, UnionFind};
use crate::purge::{build_table, PurgeTable};
use crate::traces::TraceSpace;
use crate::tree::{TreeId, TreeStore};
use crate::verdict::NamedTrace;

/// Rule-application counts of one closure computation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ClosureStats {
    /// DLR applications that merged two classes.
    pub dlr_merges: usize,
    /// WSC applications that merged two classes.
    pub wsc_merges: usize,
    /// Rule applications whose pair was already related by transitivity.
    pub redundant: usize,
    /// Number of WSC sweeps, including the final one that merged nothing.
    pub sweeps: usize,
}

/// The bounded unwinding relations of a system.
#[derive(Clone, Debug)]
pub struct UnwindingResult {
    pub depth: usize,
    /// One partition per domain, with the merge log of its derivation.
    pub partitions: Vec<TracePartition>,
    pub stats: ClosureStats,
    /// True iff the last sweep merged nothing (the bounded fixpoint was
    /// reached rather than the sweep limit).
    pub saturated: bool,
}

impl UnwindingResult {
    pub fn partition(&self, u: DomainId) -> &TracePartition {
        &self.partitions[u.index()]
    }
}

/// Computes the bounded unwinding relations.
pub fn unwinding_partition(pes: &Pes, space: &TraceSpace) -> UnwindingResult {
    unwinding_partition_limited(pes, space, None)
}

/// As [`unwinding_partition`], stopping after `max_sweeps` WSC sweeps.
pub fn unwinding_partition_limited(
    pes: &Pes,
    space: &TraceSpace,
    max_sweeps: Option<usize>,
) -> UnwindingResult {
    let sig = pes.signature();
    let (nd, n) = (sig.domain_count(), space.len());
    let mut ufs: Vec<UnionFind> = (0..nd).map(|_| UnionFind::new(n)).collect();
    let mut logs: Vec<Vec<(u32, u32)>> = vec![Vec::new(); nd];
    let mut stats = ClosureStats::default();

    // DLR facts do not depend on the relations, so one pass suffices.
    for u in sig.domains() {
        let (uf, log) = (&mut ufs[u.index()], &mut logs[u.index()]);
        space.for_each_extension(|id, parent, a, _| {
            if !pes.edge(space.state(parent), sig.dom(a), u) {
                if uf.union(id as u32, parent as u32) {
                    log.push((id as u32, parent as u32));
                    stats.dlr_merges += 1;
                } else {
                    stats.redundant += 1;
                }
            }
        });
    }

    let mut groups: FxHashMap<(u32, u32), (u32, u32)> = FxHashMap::default();
    let saturated = loop {
        if max_sweeps.is_some_and(|m| stats.sweeps >= m) {
            break false;
        }
        stats.sweeps += 1;
        let mut merged = 0usize;
        for u in sig.domains() {
            for a in sig.actions() {
                let d = sig.dom(a);
                groups.clear();
                for l in 0..space.depth() {
                    for alpha in space.level(l) {
                        let ku = ufs[u.index()].find(alpha as u32);
                        let kd = ufs[d.index()].find(alpha as u32);
                        match groups.get(&(ku, kd)) {
                            None => {
                                groups.insert((ku, kd), (alpha as u32, l as u32));
                            }
                            Some(&(first, fl)) => {
                                let x = space.child_at(l, alpha, a) as u32;
                                let y = space.child_at(fl as usize, first as usize, a) as u32;
                                if ufs[u.index()].union(x, y) {
                                    logs[u.index()].push((x, y));
                                    stats.wsc_merges += 1;
                                    merged += 1;
                                } else {
                                    stats.redundant += 1;
                                }
                            }
                        }
                    }
                }
            }
        }
        if merged == 0 {
            break true;
        }
    };

    let partitions = ufs
        .iter_mut()
        .zip(logs)
        .enumerate()
        .map(|(u, (uf, log))| {
            TracePartition::from_union_find(DomainId(u as u16), space.depth(), uf).with_merge_log(log)
        })
        .collect();
    UnwindingResult {
        depth: space.depth(),
        partitions,
        stats,
        saturated,
    }
}

/// `α ⊨ D_G(u ↣ v)`: the edge holds at every world related to `α` by the
/// relation of every member of `group`.
pub fn holds_distributed(
    result: &UnwindingResult,
    pes: &Pes,
    space: &TraceSpace,
    group: DomainSet,
    atom: (DomainId, DomainId),
    trace: &[ActionId],
) -> Result<bool> {
    let alpha = space.require(trace)?;
    Ok(holds_distributed_at(result, pes, space, group, atom, alpha))
}

pub(crate) fn holds_distributed_at(
    result: &UnwindingResult,
    pes: &Pes,
    space: &TraceSpace,
    group: DomainSet,
    (u, v): (DomainId, DomainId),
    alpha: usize,
) -> bool {
    let related = |beta: usize| group.iter().all(|g| result.partition(g).same(alpha, beta));
    pes.edge(space.state(alpha), u, v)
        && (0..space.interior())
            .filter(|b| related(*b))
            .all(|b| pes.edge(space.state(b), u, v))
}

/// Precomputed `D_{u,v}(u ↣ v)` for every ordered pair of distinct
/// domains, keyed by the pair of class representatives.
pub(crate) struct PairKnowledge {
    nd: usize,
    tables: Vec<FxHashMap<(u32, u32), bool>>,
}

impl PairKnowledge {
    pub(crate) fn new(result: &UnwindingResult, pes: &Pes, space: &TraceSpace) -> Self {
        let nd = pes.signature().domain_count();
        let mut tables = Vec::with_capacity(nd * nd);
        for u in 0..nd {
            for v in 0..nd {
                let mut t: FxHashMap<(u32, u32), bool> = FxHashMap::default();
                if u != v {
                    let (pu, pv) = (&result.partitions[u], &result.partitions[v]);
                    let (du, dv) = (DomainId(u as u16), DomainId(v as u16));
                    for beta in 0..space.interior() {
                        let e = pes.edge(space.state(beta), du, dv);
                        let key = (pu.reps()[beta], pv.reps()[beta]);
                        let slot = t.entry(key).or_insert(true);
                        *slot &= e;
                    }
                }
                tables.push(t);
            }
        }
        PairKnowledge { nd, tables }
    }

    /// `α ⊨ D_{u,v}(u ↣ v)` with `α` given by id.
    pub(crate) fn holds(
        &self,
        result: &UnwindingResult,
        pes: &Pes,
        space: &TraceSpace,
        alpha: usize,
        u: DomainId,
        v: DomainId,
    ) -> bool {
        if u == v {
            return true;
        }
        let key = (
            result.partition(u).reps()[alpha],
            result.partition(v).reps()[alpha],
        );
        pes.edge(space.state(alpha), u, v)
            && *self.tables[u.index() * self.nd + v.index()]
                .get(&key)
                .unwrap_or(&true)
    }
}

/// `ta□` for every trace of the space.
pub fn ta_must_table(
    store: &mut TreeStore,
    pes: &Pes,
    space: &TraceSpace,
    result: &UnwindingResult,
) -> PurgeTable {
    let know = PairKnowledge::new(result, pes, space);
    build_table(store, pes.signature(), space, |parent, d, u| {
        know.holds(result, pes, space, parent, d, u)
    })
}

/// `ta□_u(α)` for a single trace within the bound.
pub fn ta_must(
    store: &mut TreeStore,
    pes: &Pes,
    space: &TraceSpace,
    result: &UnwindingResult,
    trace: &[ActionId],
    u: DomainId,
) -> Result<TreeId> {
    space.require(trace)?;
    let sig = pes.signature();
    let mut cur = vec![crate::tree::LEAF; sig.domain_count()];
    for (i, a) in trace.iter().enumerate() {
        let prefix = space.id_of(&trace[..i]).expect("prefix within bound");
        let d = sig.dom(*a);
        let actor = cur[d.index()];
        cur = sig
            .domains()
            .map(|v| {
                let pair = DomainSet::singleton(d).union(DomainSet::singleton(v));
                if holds_distributed_at(result, pes, space, pair, (d, v), prefix) {
                    store.node(cur[v.index()], actor, *a)
                } else {
                    cur[v.index()]
                }
            })
            .collect();
    }
    Ok(cur[u.index()])
}

/// A pair of traces on which `∼unw` and `ta□`-equality disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    pub domain: String,
    pub first: NamedTrace,
    pub second: NamedTrace,
    /// True when the pair is related by the unwinding relation but has
    /// different `ta□` trees; false for the converse.
    pub related_by_unwinding: bool,
    /// True when the longer trace lies within the margin of the bound.
    pub boundary: bool,
}

/// Outcome of comparing `∼unw` with `ta□`-equality.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TheoremReport {
    pub depth: usize,
    pub margin: usize,
    /// Number of traces of length at most `depth - margin`.
    pub interior_traces: usize,
    pub interior_mismatches: usize,
    pub boundary_mismatches: usize,
    /// Up to ten example mismatches per domain.
    pub examples: Vec<Mismatch>,
}

impl TheoremReport {
    pub fn agrees(&self) -> bool {
        self.interior_mismatches == 0
    }
}

/// Computes both relations at `depth` and compares them, classifying
/// disagreements between traces no longer than `depth - margin` as interior
/// and the rest as boundary artifacts.
pub fn check_theorem_mustunwind(pes: &Pes, depth: usize, margin: usize) -> Result<TheoremReport> {
    let margin = margin.min(depth);
    let space = TraceSpace::new(pes, depth)?;
    let unw = unwinding_partition(pes, &space);
    let mut store = TreeStore::new();
    let must = ta_must_table(&mut store, pes, &space, &unw).partitions();
    Ok(compare_partitions(pes, &space, &unw.partitions, &must, margin))
}

pub(crate) fn compare_partitions(
    pes: &Pes,
    space: &TraceSpace,
    unw: &[TracePartition],
    must: &[TracePartition],
    margin: usize,
) -> TheoremReport {
    let sig = pes.signature();
    let limit = space.depth() - margin;
    let mut report = TheoremReport {
        depth: space.depth(),
        margin,
        interior_traces: space.count_upto(limit),
        interior_mismatches: 0,
        boundary_mismatches: 0,
        examples: Vec::new(),
    };
    for (p1, p2) in unw.iter().zip(must) {
        let mut first1: FxHashMap<u32, usize> = FxHashMap::default();
        let mut first2: FxHashMap<u32, usize> = FxHashMap::default();
        let mut shown = 0;
        for id in 0..space.len() {
            let f1 = *first1.entry(p1.reps()[id]).or_insert(id);
            let f2 = *first2.entry(p2.reps()[id]).or_insert(id);
            let boundary = space.length(id) > limit;
            for (other, related_by_unwinding) in [(f1, true), (f2, false)] {
                let differs = if related_by_unwinding {
                    !p2.same(other, id)
                } else {
                    !p1.same(other, id)
                };
                if other == id || !differs {
                    continue;
                }
                if boundary {
                    report.boundary_mismatches += 1;
                } else {
                    report.interior_mismatches += 1;
                }
                if shown < 10 {
                    shown += 1;
                    report.examples.push(Mismatch {
                        domain: sig.domain_name(p1.domain()).to_string(),
                        first: sig.trace_names(&space.trace(other)),
                        second: sig.trace_names(&space.trace(id)),
                        related_by_unwinding,
                        boundary,
                    });
                }
            }
        }
    }
    report
}
