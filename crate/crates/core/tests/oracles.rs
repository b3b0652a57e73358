//! Library results against independent brute-force computations.

mod common;

use common::{all_traces, corpus_bases, random_systems, ta_oracle, NaiveClosure};
use dynflow::checkers::{
    check_i_security, check_lpurge_security, dsrc, state_unwinding_check, UnwindingMode,
};
use dynflow::gen::{random_system, rng, SystemShape};
use dynflow::model::{check_bisimilar, encode, unfold, Machine, PolicyAutomaton, Signature};
use dynflow::purge::{check_f_security, ta_may_table, ta_static_table, Mode, StaticPolicy};
use dynflow::unwinding::{ta_must_table, unwinding_partition};
use dynflow::{ActionId, DomainId, DomainSet, Outcome, Pes, StateId, TraceSpace, TreeStore};
use rand::Rng;

fn small_shape() -> SystemShape {
    SystemShape {
        max_states: 3,
        ..SystemShape::default()
    }
}

#[test]
fn unwinding_closure_matches_naive_iteration() {
    let mut r = rng(11);
    let mut systems: Vec<Pes> = (0..20).map(|_| random_system(&mut r, small_shape())).collect();
    systems.extend(corpus_bases().into_iter().map(|(_, p)| p));
    let k = 4;
    for pes in &systems {
        let naive = NaiveClosure::new(pes, k);
        let space = TraceSpace::new(pes, k).unwrap();
        let unw = unwinding_partition(pes, &space);
        assert!(unw.saturated);
        for u in pes.signature().domains() {
            let part = unw.partition(u);
            for (i, a) in naive.traces.iter().enumerate() {
                let ia = space.id_of(a).unwrap();
                for (j, b) in naive.traces.iter().enumerate() {
                    let ib = space.id_of(b).unwrap();
                    assert_eq!(
                        naive.rel[u.index()][i][j],
                        part.same(ia, ib),
                        "{:?} {:?} for {u:?}",
                        a,
                        b
                    );
                }
            }
        }
    }
}

#[test]
fn static_purge_trees_match_recursion() {
    let mut r = rng(12);
    for _ in 0..30 {
        let pes = random_system(&mut r, SystemShape::default());
        let policy = StaticPolicy::at_state(&pes, pes.initial());
        let cond = |_: &[ActionId], d: DomainId, u: DomainId| pes.edge(pes.initial(), d, u);
        let space = TraceSpace::new(&pes, 4).unwrap();
        let mut store = TreeStore::new();
        let table = ta_static_table(&mut store, pes.signature(), &policy, &space);
        for t in all_traces(&pes, 4) {
            let id = space.id_of(&t).unwrap();
            for u in pes.signature().domains() {
                assert_eq!(store.expand(table.get(u, id)), ta_oracle(&pes, &t, u, &cond));
            }
        }
    }
}

#[test]
fn static_tree_for_two_domain_trace() {
    let sig = Signature::new(["A", "B"], [("a", "A"), ("b", "B")]).unwrap();
    let a = sig.action_id("a").unwrap();
    let b = sig.action_id("b").unwrap();
    let (da, db) = (sig.domain_id("A").unwrap(), sig.domain_id("B").unwrap());
    let policy = StaticPolicy::from_pairs(&sig, &[(da, db)]);
    let mut store = TreeStore::new();
    let got = dynflow::purge::ta_static(&mut store, &sig, &policy, &[a, b], db);
    use dynflow::tree::Tree::{Leaf, Node};
    let leaf_a = Node(Box::new(Leaf), Box::new(Leaf), a);
    // The right subtree is B's own tree before b, which already records a.
    let expected = Node(Box::new(leaf_a.clone()), Box::new(leaf_a.clone()), b);
    assert_eq!(store.expand(got), expected);
    let pes = {
        let mut builder = dynflow::model::PesBuilder::new(sig.clone(), ["s"]).unwrap();
        builder.initial(StateId(0)).default_obs(da, "0").default_obs(db, "0").edge(StateId(0), da, db);
        builder.build().unwrap()
    };
    let cond = |_: &[ActionId], d: DomainId, u: DomainId| policy.allows(d, u);
    assert_eq!(ta_oracle(&pes, &[a, b], db, &cond), expected);
    // A never hears from B.
    let got_a = dynflow::purge::ta_static(&mut store, &sig, &policy, &[a, b], da);
    assert_eq!(store.expand(got_a), leaf_a);
}

#[test]
fn permissive_purge_trees_match_recursion() {
    let mut systems: Vec<Pes> = random_systems(30, 13).into_iter().map(|(_, p)| p).collect();
    systems.extend(corpus_bases().into_iter().map(|(_, p)| p));
    for pes in &systems {
        let cond = |alpha: &[ActionId], d: DomainId, u: DomainId| pes.edge(pes.run(alpha), d, u);
        let space = TraceSpace::new(pes, 4).unwrap();
        let mut store = TreeStore::new();
        let table = ta_may_table(&mut store, pes, &space);
        for t in all_traces(pes, 4) {
            let id = space.id_of(&t).unwrap();
            for u in pes.signature().domains() {
                assert_eq!(store.expand(table.get(u, id)), ta_oracle(pes, &t, u, &cond));
            }
        }
    }
}

#[test]
fn prohibitive_purge_trees_match_knowledge_recursion() {
    let mut systems: Vec<Pes> = random_systems(20, 14)
        .into_iter()
        .map(|(_, p)| p)
        .filter(|p| p.state_count() <= 3)
        .collect();
    systems.extend(corpus_bases().into_iter().map(|(_, p)| p));
    let k = 4;
    for pes in &systems {
        let naive = NaiveClosure::new(pes, k);
        let cond = |alpha: &[ActionId], d: DomainId, u: DomainId| naive.knows_edge(pes, k, alpha, d, u);
        let space = TraceSpace::new(pes, k).unwrap();
        let unw = unwinding_partition(pes, &space);
        let mut store = TreeStore::new();
        let table = ta_must_table(&mut store, pes, &space, &unw);
        for t in all_traces(pes, k) {
            let id = space.id_of(&t).unwrap();
            for u in pes.signature().domains() {
                assert_eq!(store.expand(table.get(u, id)), ta_oracle(pes, &t, u, &cond), "{t:?} {u:?}");
            }
        }
    }
}

#[test]
fn final_observation_and_view_verdicts_agree_on_the_corpus() {
    for (name, pes) in corpus_bases() {
        let space = TraceSpace::new(&pes, 6).unwrap();
        let mut store = TreeStore::new();
        let unw = unwinding_partition(&pes, &space);
        let tables = [
            ta_static_table(&mut store, pes.signature(), &StaticPolicy::at_state(&pes, pes.initial()), &space),
            ta_may_table(&mut store, &pes, &space),
            ta_must_table(&mut store, &pes, &space, &unw),
        ];
        for table in &tables {
            let parts = table.partitions();
            let obs = check_f_security("f", &parts, &pes, &space, Mode::FinalObs);
            let view = check_f_security("f", &parts, &pes, &space, Mode::View);
            assert_eq!(obs.outcome, view.outcome, "{name}");
        }
    }
}

fn random_tables(r: &mut impl Rng, sig: &Signature, states: usize) -> (Vec<StateId>, StateId) {
    let trans = (0..states * sig.action_count())
        .map(|_| StateId(r.gen_range(0..states as u32)))
        .collect();
    (trans, StateId(r.gen_range(0..states as u32)))
}

#[test]
fn product_runs_component_wise() {
    let mut r = rng(15);
    let sig = Signature::new(["A", "B"], [("a", "A"), ("b", "B"), ("c", "A")]).unwrap();
    for _ in 0..10 {
        let (mt, mi) = random_tables(&mut r, &sig, 2);
        let machine = Machine {
            sig: sig.clone(),
            state_names: vec!["m0".into(), "m1".into()],
            initial: mi,
            trans: mt,
            obs: (0..4).map(|_| r.gen_range(0..3).to_string()).collect(),
        };
        let (pt, pi) = random_tables(&mut r, &sig, 2);
        let policy = PolicyAutomaton {
            sig: sig.clone(),
            state_names: vec!["p0".into(), "p1".into()],
            initial: pi,
            trans: pt,
            edges: (0..4).map(|_| r.gen_range(0..4)).collect(),
        };
        let pes = encode(&machine, &policy).unwrap();
        assert!(pes.state_count() <= 4);
        for _ in 0..20 {
            let len = r.gen_range(0..8);
            let t: Vec<ActionId> = (0..len).map(|_| ActionId(r.gen_range(0..3))).collect();
            let s = pes.run(&t);
            assert_eq!(s.index(), machine.run(&t).index() * 2 + policy.run(&t).index());
        }
        for t in all_traces(&pes, 4) {
            let (s, p) = (pes.run(&t), policy.run(&t));
            for u in sig.domains() {
                assert_eq!(pes.edge_mask(s, u), policy.edge_mask(p, u));
                assert_eq!(pes.obs_value(s, u), machine.obs(machine.run(&t), u));
            }
        }
    }
}

#[test]
fn unfolding_is_bisimilar() {
    for (_, pes) in corpus_bases() {
        let k = 5;
        let tree = unfold(&pes, k).unwrap();
        assert!(check_bisimilar(&pes, &tree, k).unwrap().bisimilar);
        for t in all_traces(&pes, k) {
            for u in pes.signature().domains() {
                assert_eq!(tree.edge_mask(tree.run(&t), u), pes.edge_mask(pes.run(&t), u));
            }
        }
    }
}

#[test]
fn source_sets_on_the_first_system() {
    let pes = dynflow::corpus::figure1();
    let sig = pes.signature();
    let d = |n: &str| sig.domain_id(n).unwrap();
    let ab: DomainSet = [d("A"), d("B")].into_iter().collect();
    let s1 = pes.state_id("s1").unwrap();
    assert_eq!(dsrc(&pes, &sig.parse_trace("a").unwrap(), d("B"), s1), ab);
    assert_eq!(dsrc(&pes, &sig.parse_trace("pa").unwrap(), d("B"), pes.initial()), ab);
}

#[test]
fn i_security_implies_lpurge_security() {
    let mut seen_secure = 0;
    for (name, pes) in random_systems(60, 16) {
        let i = check_i_security(&pes, 4).unwrap();
        let l = check_lpurge_security(&pes, 4).unwrap();
        if i.outcome == Outcome::BoundedSecure {
            seen_secure += 1;
            assert_eq!(l.outcome, Outcome::BoundedSecure, "{name}");
        }
    }
    assert!(seen_secure > 0);
}

#[test]
fn certified_state_unwinding_agrees_with_bounded_checks() {
    for (name, pes) in random_systems(60, 17).into_iter().chain(corpus_bases()) {
        for (mode, property) in [(UnwindingMode::Box, "unwinding"), (UnwindingMode::Diamond, "mayta")] {
            let cert = state_unwinding_check(&pes, mode);
            if cert.verdict.outcome == Outcome::CertifiedSecure {
                let bounded = if property == "unwinding" {
                    dynflow::checkers::check_unwinding_security(&pes, 5).unwrap()
                } else {
                    dynflow::checkers::check_ta_may_security(&pes, 5).unwrap()
                };
                assert_eq!(bounded.outcome, Outcome::BoundedSecure, "{name} {property}");
            }
        }
    }
}
