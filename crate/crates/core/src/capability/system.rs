//! Finite exploration of a capability configuration into a
//! policy-enhanced system, and its access-control interpretation.

use rustc_hash::FxHashMap;

use super::config::CapabilityConfig;
use super::model::{associated_policy, cap_step, CapState};
use crate::access::{ObjectId, ObjectSet, StructuredBuilder, StructuredSystem, Value};
use crate::error::{Error, Result};
use crate::model::{DomainId, Pes, PesBuilder, Signature, StateId};

/// The explored system with the capability state behind every state.
#[derive(Clone, Debug)]
pub struct CapabilitySystem {
    pub pes: Pes,
    pub states: Vec<CapState>,
    /// Exploration bound: every state within `depth` steps has its genuine
    /// successors.
    pub depth: usize,
    /// True when exploration closed before the bound, so the system is the
    /// exact reachable part of the configuration.
    pub complete: bool,
}

/// Breadth-first exploration of the states reachable in at most
/// `depth + 1` steps. States first reached at depth `depth + 1` are
/// frontier states: their transitions are self-loops.
pub fn explore(config: &CapabilityConfig, depth: usize) -> Result<CapabilitySystem> {
    let u = &config.universe;
    if config.initial.procs.len() != u.process_count() {
        return Err(Error::Capability("initial state does not match the processes".into()));
    }
    config.initial.validate_initial(u)?;
    let sig = Signature::new(
        u.processes().iter().cloned(),
        config
            .alphabet
            .iter()
            .map(|a| (a.name(u), u.processes()[a.process()].clone())),
    )?;
    let mut index: FxHashMap<CapState, u32> = FxHashMap::default();
    let mut states = vec![config.initial.clone()];
    let mut level = vec![0usize];
    index.insert(config.initial.clone(), 0);
    let mut trans: Vec<(u32, u16, u32)> = Vec::new();
    let mut head = 0;
    while head < states.len() {
        if level[head] > depth {
            break;
        }
        for (ai, a) in config.alphabet.iter().enumerate() {
            let next = cap_step(u, &states[head], a);
            let t = match index.get(&next) {
                Some(t) => *t,
                None => {
                    let t = states.len() as u32;
                    index.insert(next.clone(), t);
                    states.push(next);
                    level.push(level[head] + 1);
                    t
                }
            };
            trans.push((head as u32, ai as u16, t));
        }
        head += 1;
    }
    let frontier: Vec<bool> = level.iter().map(|l| *l > depth).collect();
    let complete = !frontier.iter().any(|f| *f);

    let names: Vec<String> = states.iter().map(|s| config.render_state(s)).collect();
    let mut b = PesBuilder::new(sig, names)?;
    b.initial(StateId(0));
    for (s, a, t) in trans {
        b.transition(StateId(s), crate::model::ActionId(a), StateId(t))?;
    }
    for (i, st) in states.iter().enumerate() {
        let s = StateId(i as u32);
        for (p, row) in associated_policy(st).iter().enumerate() {
            let d = DomainId(p as u16);
            b.obs(s, d, &config.observe(p, st));
            for q in row.iter() {
                b.edge(s, d, q);
            }
        }
    }
    if !complete {
        b.truncated(depth + 1, frontier);
    }
    Ok(CapabilitySystem {
        pes: b.build()?,
        states,
        depth,
        complete,
    })
}

/// The explored system with the associated policy.
pub fn build_pes(config: &CapabilityConfig, depth: usize) -> Result<Pes> {
    Ok(explore(config, depth)?.pes)
}

/// Objects of process `p`, in order: `S_p`, `O_p`, `in_p`, `m_p`, then one
/// object per data slot.
fn process_objects(config: &CapabilityConfig, p: usize) -> Vec<String> {
    let name = &config.universe.processes()[p];
    let mut out: Vec<String> = ["S", "O", "in", "m"]
        .iter()
        .map(|o| format!("{o}_{name}"))
        .collect();
    out.extend(config.slots.iter().map(|s| format!("{s}_{name}")));
    out
}

/// The access-control interpretation: each process observes its own
/// objects and its `oset`, and alters its own objects plus `in_q` and
/// `O_q` of every `q` with `S_p ⊆ S_q`.
pub fn capability_drm_interpretation(config: &CapabilityConfig, depth: usize) -> Result<StructuredSystem> {
    let sys = explore(config, depth)?;
    interpret(config, &sys)
}

/// As [`capability_drm_interpretation`], for an already explored system.
pub fn interpret(config: &CapabilityConfig, sys: &CapabilitySystem) -> Result<StructuredSystem> {
    let u = &config.universe;
    let n = u.process_count();
    let per: Vec<Vec<String>> = (0..n).map(|p| process_objects(config, p)).collect();
    let stride = per[0].len();
    let mut b = StructuredBuilder::new(sys.pes.clone(), per.concat())?;
    let obj = |p: usize, k: usize| ObjectId((p * stride + k) as u16);
    let own: Vec<ObjectSet> = (0..n)
        .map(|p| (0..stride).map(|k| obj(p, k)).collect())
        .collect();
    for (i, st) in sys.states.iter().enumerate() {
        let s = StateId(i as u32);
        let policy = associated_policy(st);
        for p in 0..n {
            let ps = &st.procs[p];
            let mut values = vec![
                u.render_tags(ps.secrecy),
                u.render_caps(ps.caps),
                format!(
                    "[{}]",
                    ps.inbox.iter().map(|m| config.render_msg(*m)).collect::<Vec<_>>().join(".")
                ),
                config.render_msg(ps.message),
            ];
            values.extend(ps.data.iter().map(|m| config.render_msg(*m)));
            for (k, v) in values.into_iter().enumerate() {
                b.set_contents(obj(p, k), s, Value::Token(v));
            }
            let d = DomainId(p as u16);
            let mut observe = own[p];
            observe.insert(b.oset(d));
            b.set_observe(d, s, observe);
            let mut alter = own[p];
            for q in policy[p].iter().filter(|q| q.index() != p) {
                alter.insert(obj(q.index(), 2));
                alter.insert(obj(q.index(), 1));
            }
            b.set_alter(d, s, alter);
        }
    }
    if !sys.complete {
        b.note(format!(
            "states beyond depth {} are frontier states without genuine successors",
            sys.depth
        ));
    }
    b.build()
}
