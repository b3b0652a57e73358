//! Seeded random systems, trees and capability action sequences for
//! property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capability::{CapAction, CapabilityConfig};
use crate::model::{ActionId, DomainId, Pes, PesBuilder, Signature, StateId};
use crate::tree::Tree;

/// Size bounds for [`random_system`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SystemShape {
    pub max_states: usize,
    pub max_actions: usize,
    pub max_domains: usize,
    /// Probability (in percent) of each non-reflexive edge.
    pub edge_percent: u32,
}

impl Default for SystemShape {
    fn default() -> Self {
        SystemShape {
            max_states: 4,
            max_actions: 3,
            max_domains: 3,
            edge_percent: 50,
        }
    }
}

/// A deterministic generator from a seed.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random system within `shape`: at least two domains and one action,
/// binary observations, and independently drawn transitions and edges.
pub fn random_system(rng: &mut impl Rng, shape: SystemShape) -> Pes {
    let nd = rng.gen_range(2.min(shape.max_domains)..=shape.max_domains);
    let na = rng.gen_range(1..=shape.max_actions);
    let ns = rng.gen_range(1..=shape.max_states);
    let domains: Vec<String> = (0..nd).map(|i| ["A", "B", "C", "D", "E", "F"][i % 6].to_string()).collect();
    let actions: Vec<(String, String)> = (0..na)
        .map(|i| {
            let name = ["a", "b", "c", "d", "f", "g"][i % 6].to_string();
            (name, domains[rng.gen_range(0..nd)].clone())
        })
        .collect();
    let sig = Signature::new(domains, actions).expect("generated names are distinct");
    let names: Vec<String> = (0..ns).map(|i| format!("s{i}")).collect();
    let mut b = PesBuilder::new(sig.clone(), names).expect("generated states are distinct");
    b.initial(StateId(0));
    for s in 0..ns as u32 {
        for a in sig.actions() {
            b.transition(StateId(s), a, StateId(rng.gen_range(0..ns as u32)))
                .expect("one transition per pair");
        }
        for u in sig.domains() {
            b.obs(StateId(s), u, if rng.gen_bool(0.5) { "1" } else { "0" });
            for v in sig.domains() {
                if u != v && rng.gen_ratio(shape.edge_percent, 100) {
                    b.edge(StateId(s), u, v);
                }
            }
        }
    }
    b.build().expect("generated system is well formed")
}

/// A random tree with at most `max_depth` levels over `actions` actions.
pub fn random_tree(rng: &mut impl Rng, actions: usize, max_depth: usize) -> Tree {
    if max_depth == 0 || rng.gen_ratio(1, 4) {
        return Tree::Leaf;
    }
    let l = random_tree(rng, actions, max_depth - 1);
    let r = random_tree(rng, actions, max_depth - 1);
    Tree::Node(Box::new(l), Box::new(r), ActionId(rng.gen_range(0..actions as u16)))
}

/// A random action sequence drawn from the configuration's alphabet.
pub fn random_actions(rng: &mut impl Rng, config: &CapabilityConfig, len: usize) -> Vec<CapAction> {
    (0..len)
        .map(|_| config.alphabet.choose(rng).expect("non-empty alphabet").clone())
        .collect()
}

/// A random domain of a system.
pub fn random_domain(rng: &mut impl Rng, pes: &Pes) -> DomainId {
    DomainId(rng.gen_range(0..pes.signature().domain_count() as u16))
}
