//! A sound state-level unwinding method. Per-domain equivalences on the
//! reachable states are closed under local respect and step consistency;
//! if they respect observations, the system is secure for all traces.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::model::{DomainId, Pes};
use crate::partition::UnionFind;
use crate::verdict::{Outcome, Verdict, Witness};

/// Which trace semantics the state relations stand for.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum UnwindingMode {
    /// Step consistency applies to every related pair (`ta□`).
    Box,
    /// Step consistency applies only where the acting domain may reach the
    /// observer (`ta◇`).
    Diamond,
}

impl UnwindingMode {
    pub fn name(self) -> &'static str {
        match self {
            UnwindingMode::Box => "box",
            UnwindingMode::Diamond => "diamond",
        }
    }
}

/// The state relations and the resulting verdict.
#[derive(Clone, Debug)]
pub struct StateUnwinding {
    pub mode: UnwindingMode,
    /// `classes[u][s]`: the smallest state index related to `s` for `u`.
    /// Unreachable states are singletons.
    pub classes: Vec<Vec<u32>>,
    pub verdict: Verdict,
}

/// Computes the least relations on reachable states closed under
///
/// * local respect: `s ∼_u s·a` whenever `dom(a) ̸↣ u` at `s`;
/// * step consistency: `s ∼_u t` and `s ∼_dom(a) t` imply `s·a ∼_u t·a`
///   (in diamond mode only when `dom(a) ↣ u` at both states),
///
/// and checks output consistency. Success certifies security for traces of
/// every length; failure is inconclusive.
pub fn state_unwinding_check(pes: &Pes, mode: UnwindingMode) -> StateUnwinding {
    let sig = pes.signature();
    let reach = pes.reachable_states();
    let n = pes.state_count();
    let mut ufs: Vec<UnionFind> = sig.domains().map(|_| UnionFind::new(n)).collect();

    for s in &reach {
        for a in sig.actions() {
            let d = sig.dom(a);
            for u in sig.domains() {
                if !pes.edge(*s, d, u) {
                    ufs[u.index()].union(pes.step(*s, a).0, s.0);
                }
            }
        }
    }
    let mut groups: FxHashMap<(u32, u32, bool), u32> = FxHashMap::default();
    loop {
        let mut merged = false;
        for u in sig.domains() {
            for a in sig.actions() {
                let d = sig.dom(a);
                groups.clear();
                for s in &reach {
                    let may = pes.edge(*s, d, u);
                    if mode == UnwindingMode::Diamond && !may {
                        continue;
                    }
                    let key = (ufs[u.index()].find(s.0), ufs[d.index()].find(s.0), may);
                    let key = if mode == UnwindingMode::Box { (key.0, key.1, true) } else { key };
                    match groups.get(&key) {
                        None => {
                            groups.insert(key, s.0);
                        }
                        Some(&t) => {
                            let x = pes.step(*s, a).0;
                            let y = pes.step(crate::model::StateId(t), a).0;
                            merged |= ufs[u.index()].union(x, y);
                        }
                    }
                }
            }
        }
        if !merged {
            break;
        }
    }

    let classes: Vec<Vec<u32>> = ufs.iter_mut().map(|uf| uf.representatives()).collect();
    let property = match mode {
        UnwindingMode::Box => "state-box",
        UnwindingMode::Diamond => "state-diamond",
    };
    let mut witness = None;
    'outer: for (i, s) in reach.iter().enumerate() {
        for u in sig.domains() {
            let rep = reach[..i]
                .iter()
                .find(|t| classes[u.index()][t.index()] == classes[u.index()][s.index()]);
            if let Some(t) = rep {
                if pes.obs(*t, u) != pes.obs(*s, u) {
                    witness = Some(Witness::StatePair {
                        first: pes.state_name(*t).to_string(),
                        second: pes.state_name(*s).to_string(),
                        domain: sig.domain_name(u).to_string(),
                    });
                    break 'outer;
                }
            }
        }
    }
    let verdict = match witness {
        None => Verdict::new(property, Outcome::CertifiedSecure, None)
            .with_note(format!("{}-security holds for traces of every length", mode.name())),
        Some(w) => {
            let mut v = Verdict::new(property, Outcome::Inconclusive, None)
                .with_note("the related states differ in observation; the method does not apply");
            v.witness = Some(w);
            v
        }
    };
    let verdict = match pes.truncated_at() {
        Some(k) => verdict.with_note(format!(
            "the system is a truncated unfolding at depth {k}; the result concerns it, not the original"
        )),
        None => verdict,
    };
    StateUnwinding {
        mode,
        classes,
        verdict,
    }
}

impl StateUnwinding {
    /// Are two states related for `u`?
    pub fn related(&self, u: DomainId, s: crate::model::StateId, t: crate::model::StateId) -> bool {
        self.classes[u.index()][s.index()] == self.classes[u.index()][t.index()]
    }
}
