//! Union-find and immutable per-domain partitions of a trace space.

use std::collections::hash_map::Entry;
use std::hash::Hash;

use rustc_hash::FxHashMap;

use crate::model::DomainId;

/// Disjoint sets over `0..n` whose root is always the smallest member, so
/// representatives are canonical without a separate normalisation pass.
#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<u32>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    /// Representative (smallest member) of `x`'s class, with path halving.
    pub fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    /// Merges two classes; returns false when they were already one.
    pub fn union(&mut self, x: u32, y: u32) -> bool {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return false;
        }
        let (lo, hi) = if rx < ry { (rx, ry) } else { (ry, rx) };
        self.parent[hi as usize] = lo;
        true
    }

    /// Fully compressed representative table.
    pub fn representatives(&mut self) -> Vec<u32> {
        (0..self.parent.len() as u32).map(|x| self.find(x)).collect()
    }
}

/// An equivalence over the traces of a [`crate::traces::TraceSpace`], for
/// one domain. The representative of every class is its shortlex-least
/// trace.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TracePartition {
    domain: DomainId,
    depth: usize,
    rep: Vec<u32>,
    /// For relations generated by rules: every effective merge, in the
    /// order it was performed.
    merge_log: Option<Vec<(u32, u32)>>,
}

impl TracePartition {
    pub fn from_union_find(domain: DomainId, depth: usize, uf: &mut UnionFind) -> Self {
        TracePartition {
            domain,
            depth,
            rep: uf.representatives(),
            merge_log: None,
        }
    }

    /// Groups traces by equal key: `keys[id]` is the value of trace `id`.
    pub fn from_keys<K: Hash + Eq>(domain: DomainId, depth: usize, keys: &[K]) -> Self {
        let mut first: FxHashMap<&K, u32> = FxHashMap::default();
        let rep = keys
            .iter()
            .enumerate()
            .map(|(i, k)| match first.entry(k) {
                Entry::Occupied(e) => *e.get(),
                Entry::Vacant(e) => *e.insert(i as u32),
            })
            .collect();
        TracePartition {
            domain,
            depth,
            rep,
            merge_log: None,
        }
    }

    pub(crate) fn with_merge_log(mut self, log: Vec<(u32, u32)>) -> Self {
        self.merge_log = Some(log);
        self
    }

    pub fn domain(&self) -> DomainId {
        self.domain
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.rep.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rep.is_empty()
    }

    /// Canonical representative of a trace's class.
    pub fn rep(&self, id: usize) -> usize {
        self.rep[id] as usize
    }

    pub fn reps(&self) -> &[u32] {
        &self.rep
    }

    pub fn same(&self, x: usize, y: usize) -> bool {
        self.rep[x] == self.rep[y]
    }

    pub fn merge_log(&self) -> Option<&[(u32, u32)]> {
        self.merge_log.as_deref()
    }

    pub fn class_count(&self) -> usize {
        self.rep
            .iter()
            .enumerate()
            .filter(|(i, r)| **r as usize == *i)
            .count()
    }

    /// Classes as sorted id lists, ordered by representative. Only traces
    /// with id below `limit` are listed.
    pub fn classes(&self, limit: usize) -> Vec<Vec<usize>> {
        let mut index: FxHashMap<u32, usize> = FxHashMap::default();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for (id, r) in self.rep.iter().enumerate().take(limit) {
            let slot = *index.entry(*r).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[slot].push(id);
        }
        out
    }

    /// First pair `(x, y)`, `x < y < limit`, equivalent here but not in
    /// `coarser`; `None` when every class (restricted to ids below `limit`)
    /// lies inside a class of `coarser`.
    pub fn refinement_violation(&self, coarser: &TracePartition, limit: usize) -> Option<(usize, usize)> {
        let mut seen: FxHashMap<u32, usize> = FxHashMap::default();
        for id in 0..limit.min(self.len()) {
            match seen.entry(self.rep[id]) {
                Entry::Occupied(e) => {
                    let first = *e.get();
                    if !coarser.same(first, id) {
                        return Some((first, id));
                    }
                }
                Entry::Vacant(e) => {
                    e.insert(id);
                }
            }
        }
        None
    }

    /// True when both partitions agree on the traces with id below `limit`.
    pub fn agrees_with(&self, other: &TracePartition, limit: usize) -> bool {
        self.refinement_violation(other, limit).is_none()
            && other.refinement_violation(self, limit).is_none()
    }
}
