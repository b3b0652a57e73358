//! The acceptance criteria, one line each. Runs without the test harness so
//! the lines are always printed; exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::{capability_properties, random_systems, suite};
use dynflow::access::{ac_complete_construct, check_drm, Condition};
use dynflow::capability::{explore, interpret};
use dynflow::checkers::{
    check_i_security, check_locality, check_lpurge_security, check_ta_may_security,
    check_ta_must_security, check_unwinding_security, policy_leq, restrict_to_local,
    state_unwinding_check, LocalityMode, UnwindingMode,
};
use dynflow::format::{parse_system_file, print_system_file};
use dynflow::gen::{random_tree, rng};
use dynflow::partition::TracePartition;
use dynflow::purge::{ta_may_table, ta_static_table, StaticPolicy};
use dynflow::unwinding::{check_theorem_mustunwind, ta_must_table, unwinding_partition};
use dynflow::{corpus, Outcome, Pes, TraceSpace, TreeStore, Verdict, Witness};
use rustc_hash::FxHashMap;

type Check = Result<String, String>;

/// Verdicts with witnesses collected for the replay criterion.
#[derive(Default)]
struct Emitted(Vec<(String, Pes, Verdict)>);

impl Emitted {
    fn keep(&mut self, name: &str, pes: &Pes, v: &Verdict) {
        self.0.push((name.to_string(), pes.clone(), v.clone()));
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn trace_pair(first: &[&str], second: &[&str], domain: &str) -> Witness {
    Witness::TracePair {
        first: names(first),
        second: names(second),
        domain: domain.into(),
    }
}

fn criterion1(out: &mut Emitted) -> Check {
    let pes = corpus::figure1();
    let may = check_ta_may_security(&pes, 6).map_err(|e| e.to_string())?;
    ensure!(may.outcome == Outcome::BoundedSecure && may.witness.is_none(), "ta◇: {may:?}");
    let unw = check_unwinding_security(&pes, 6).map_err(|e| e.to_string())?;
    ensure!(unw.outcome == Outcome::Insecure, "unwinding: {unw:?}");
    ensure!(unw.witness == Some(trace_pair(&["p", "a"], &["a"], "B")), "unwinding witness {:?}", unw.witness);
    let must = check_ta_must_security(&pes, 6).map_err(|e| e.to_string())?;
    ensure!(must.outcome == Outcome::Insecure, "ta□: {must:?}");
    let lp = check_lpurge_security(&pes, 6).map_err(|e| e.to_string())?;
    let expected = Witness::Purge {
        trace: names(&["p", "a"]),
        domain: "B".into(),
        purged: names(&["a"]),
    };
    ensure!(lp.outcome == Outcome::Insecure && lp.witness == Some(expected), "lpurge: {lp:?}");
    for v in [&unw, &must, &lp] {
        out.keep("figure1", &pes, v);
    }
    Ok("ta◇ BOUNDED_SECURE; unwinding INSECURE (pa, a, B); ta□ INSECURE; Lpurge INSECURE (pa, B) → a".into())
}

fn criterion2(out: &mut Emitted) -> Check {
    let dotted = corpus::figure2(true);
    let plain = corpus::figure2(false);
    let lp = check_lpurge_security(&dotted, 6).map_err(|e| e.to_string())?;
    let expected = Witness::Purge {
        trace: names(&["h", "d"]),
        domain: "L".into(),
        purged: names(&["d"]),
    };
    ensure!(lp.outcome == Outcome::Insecure && lp.witness == Some(expected), "dotted: {lp:?}");
    let lp2 = check_lpurge_security(&plain, 6).map_err(|e| e.to_string())?;
    ensure!(lp2.outcome == Outcome::BoundedSecure, "plain: {lp2:?}");
    out.keep("figure2:dotted", &dotted, &lp);
    Ok("with the extra edge INSECURE (hd, L) → d; without it BOUNDED_SECURE".into())
}

fn criterion3(out: &mut Emitted) -> Check {
    let pes = corpus::figure3();
    let i = check_i_security(&pes, 6).map_err(|e| e.to_string())?;
    let expected = Witness::StatePurge {
        state: "s0".into(),
        first: names(&["h", "d"]),
        second: names(&["d"]),
        domain: "L".into(),
    };
    ensure!(i.outcome == Outcome::Insecure && i.witness == Some(expected), "isec: {i:?}");
    let unw = check_unwinding_security(&pes, 6).map_err(|e| e.to_string())?;
    ensure!(unw.outcome == Outcome::BoundedSecure, "unwinding: {unw:?}");
    let cert = state_unwinding_check(&pes, UnwindingMode::Box);
    ensure!(cert.verdict.outcome == Outcome::CertifiedSecure, "state box: {:?}", cert.verdict);
    let loc = check_locality(&pes, 6, LocalityMode::Joint).map_err(|e| e.to_string())?;
    ensure!(loc.outcome == Outcome::BoundedSecure, "locality: {loc:?}");
    out.keep("figure3", &pes, &i);
    Ok("isec INSECURE (s0, hd, d, L); unwinding BOUNDED_SECURE; box CERTIFIED_SECURE; local".into())
}

fn criterion4(out: &mut Emitted) -> Check {
    let base = corpus::figure4(false);
    let prime = corpus::figure4(true);
    let may = check_ta_may_security(&base, 8).map_err(|e| e.to_string())?;
    ensure!(may.outcome == Outcome::BoundedSecure, "ta◇ under the base policy: {may:?}");
    let loc = check_locality(&base, 8, LocalityMode::Joint).map_err(|e| e.to_string())?;
    let expected = Witness::Locality {
        first: names(&["a", "b"]),
        second: names(&["b", "a"]),
        from: "A".into(),
        to: "B".into(),
    };
    ensure!(loc.outcome == Outcome::Insecure && loc.witness == Some(expected), "locality: {loc:?}");
    let may2 = check_ta_may_security(&prime, 8).map_err(|e| e.to_string())?;
    ensure!(
        may2.outcome == Outcome::Insecure && may2.witness == Some(trace_pair(&["a", "b", "a"], &["b", "a", "a"], "B")),
        "ta◇ under the extended policy: {may2:?}"
    );
    ensure!(policy_leq(&base, &prime, 8).map_err(|e| e.to_string())?, "policy order");
    ensure!(!policy_leq(&prime, &base, 8).map_err(|e| e.to_string())?, "reversed policy order");
    out.keep("figure4", &base, &loc);
    out.keep("figure4:prime", &prime, &may2);
    Ok("ta◇ BOUNDED_SECURE, nonlocal (ab, ba, A, B); extended: INSECURE (aba, baa, B); ↣ ≤ ↣′".into())
}

fn criterion5() -> Check {
    let systems = suite();
    let mut boundary = 0;
    for (name, pes) in &systems {
        let r = check_theorem_mustunwind(pes, 5, 1).map_err(|e| e.to_string())?;
        ensure!(r.interior_mismatches == 0, "{name}: {} interior mismatches, e.g. {:?}", r.interior_mismatches, r.examples.first());
        boundary += r.boundary_mismatches;
    }
    Ok(format!(
        "{} systems, k=5: 0 interior mismatches ({boundary} boundary pairs excluded)",
        systems.len()
    ))
}

fn static_version(pes: &Pes) -> Pes {
    let init = pes.initial();
    pes.with_policy(|_, u| pes.edge_mask(init, u))
}

fn agree(a: &[TracePartition], b: &[TracePartition], limit: usize) -> bool {
    a.iter().zip(b).all(|(x, y)| x.agrees_with(y, limit))
}

fn criterion6() -> Check {
    let systems = suite();
    let k = 5;
    let mut implications = 0;
    for (name, pes) in &systems {
        let space = TraceSpace::new(pes, k).map_err(|e| e.to_string())?;
        let interior = space.count_upto(k - 1);
        let mut store = TreeStore::new();
        let unw = unwinding_partition(pes, &space);
        let may = ta_may_table(&mut store, pes, &space).partitions();
        for u in pes.signature().domains() {
            let v = may[u.index()].refinement_violation(unw.partition(u), interior);
            ensure!(v.is_none(), "{name}: ∼◇ does not refine ∼unw for {u:?} at {v:?}");
        }
        let must_v = check_ta_must_security(pes, k).map_err(|e| e.to_string())?;
        let may_v = check_ta_may_security(pes, k).map_err(|e| e.to_string())?;
        let lp = check_lpurge_security(pes, k).map_err(|e| e.to_string())?;
        let isec = check_i_security(pes, k).map_err(|e| e.to_string())?;
        if must_v.outcome == Outcome::BoundedSecure {
            implications += 1;
            ensure!(may_v.outcome == Outcome::BoundedSecure, "{name}: ta□-secure but not ta◇-secure");
            ensure!(lp.outcome == Outcome::BoundedSecure, "{name}: ta□-secure but not Lpurge-secure");
        }
        if isec.outcome == Outcome::BoundedSecure {
            implications += 1;
            ensure!(lp.outcome == Outcome::BoundedSecure, "{name}: i-secure but not Lpurge-secure");
        }
        let st = static_version(pes);
        let space = TraceSpace::new(&st, k).map_err(|e| e.to_string())?;
        let mut store = TreeStore::new();
        let policy = StaticPolicy::at_state(&st, st.initial());
        let ta = ta_static_table(&mut store, st.signature(), &policy, &space).partitions();
        let may = ta_may_table(&mut store, &st, &space).partitions();
        let unw = unwinding_partition(&st, &space);
        let must = ta_must_table(&mut store, &st, &space, &unw).partitions();
        ensure!(agree(&ta, &may, space.len()), "{name}: static ta and ta◇ differ");
        ensure!(agree(&ta, &must, space.len()), "{name}: static ta and ta□ differ");
    }
    Ok(format!(
        "{} systems: refinement on interior, {implications} implication premises, static coincidence; 0 violations",
        systems.len()
    ))
}

/// Whether some pair of traces below `limit` is related for both `u` and
/// `v` but disagrees on the edge `u ↣ v`.
fn nonlocal_within(pes: &Pes, space: &TraceSpace, parts: &[TracePartition], limit: usize) -> bool {
    let sig = pes.signature();
    for u in sig.domains() {
        for v in sig.domains() {
            let mut seen: FxHashMap<(usize, usize), bool> = FxHashMap::default();
            for id in 0..limit {
                let key = (parts[u.index()].rep(id), parts[v.index()].rep(id));
                let e = pes.edge(space.state(id), u, v);
                if *seen.entry(key).or_insert(e) != e {
                    return true;
                }
            }
        }
    }
    false
}

/// Whether some pair of traces below `limit` is related for a domain but
/// disagrees on its observation.
fn insecure_within(pes: &Pes, space: &TraceSpace, parts: &[TracePartition], limit: usize) -> bool {
    pes.signature().domains().any(|u| {
        (0..limit).any(|id| {
            let r = parts[u.index()].rep(id);
            pes.obs(space.state(id), u) != pes.obs(space.state(r), u)
        })
    })
}

fn criterion7() -> Check {
    let k = 4;
    let mut picked = Vec::new();
    let mut seed = 0x10ca1;
    while picked.len() < 20 {
        for (_, pes) in random_systems(10, seed) {
            if picked.len() < 20
                && check_locality(&pes, k, LocalityMode::Joint).map_err(|e| e.to_string())?.outcome == Outcome::Insecure
            {
                picked.push(pes);
            }
        }
        seed += 1;
    }
    let mut agreeing_partitions = 0;
    for (i, pes) in picked.iter().enumerate() {
        let r = restrict_to_local(pes, k).map_err(|e| e.to_string())?;
        ensure!(policy_leq(&r, pes, k).map_err(|e| e.to_string())?, "system {i}: output not below input");
        let space = TraceSpace::new(pes, k).map_err(|e| e.to_string())?;
        let rspace = TraceSpace::new(&r, k).map_err(|e| e.to_string())?;
        let interior = space.count_upto(k - 1);
        let unw = unwinding_partition(pes, &space).partitions;
        let runw = unwinding_partition(&r, &rspace).partitions;
        ensure!(!nonlocal_within(&r, &rspace, &runw, interior), "system {i}: output not local on interior traces");
        ensure!(
            insecure_within(pes, &space, &unw, interior) == insecure_within(&r, &rspace, &runw, interior),
            "system {i}: unwinding verdicts differ on interior traces"
        );
        if agree(&unw, &runw, interior) {
            agreeing_partitions += 1;
        }
    }
    Ok(format!(
        "20 nonlocal systems, k=4: ↣′ ≤ ↣, local and verdict-preserving on interior traces ({agreeing_partitions}/20 with identical interior partitions)"
    ))
}

fn criterion8() -> Check {
    let f3 = ac_complete_construct(&corpus::figure3(), 4).map_err(|e| e.to_string())?;
    let r3 = check_drm(&f3, 4, true).map_err(|e| e.to_string())?;
    for c in &r3.conditions {
        ensure!(c.outcome == Outcome::Holds, "figure3 {}: {:?}", c.condition.name(), c.witness);
    }
    let f1 = ac_complete_construct(&corpus::figure1(), 4).map_err(|e| e.to_string())?;
    let r1 = check_drm(&f1, 4, true).map_err(|e| e.to_string())?;
    ensure!(r1.basic_holds(), "figure1 DRM-1..6 fail: {:?}", r1.conditions);
    let strong = r1.get(Condition::Drm5Strong).ok_or("no DRM-5' result")?;
    ensure!(strong.outcome == Outcome::Fails, "figure1 DRM-5' holds");
    let w = strong.witness.as_ref().ok_or("DRM-5' failure without witness")?;
    ensure!(w.states == names(&["ε", "p"]), "DRM-5' witness states {:?}", w.states);
    Ok(format!(
        "figure3: all 7 conditions hold; figure1: DRM-1..6 hold, DRM-5' fails at ({}, {}; {})",
        w.states[0],
        w.states[1],
        w.domains.join(" ")
    ))
}

fn criterion9() -> Check {
    let config = corpus::capability();
    let depth = 4;
    let sys = explore(&config, depth).map_err(|e| e.to_string())?;
    let st = interpret(&config, &sys).map_err(|e| e.to_string())?;
    let drm = check_drm(&st, depth, true).map_err(|e| e.to_string())?;
    for c in &drm.conditions {
        ensure!(c.outcome == Outcome::Holds, "{}: {:?}", c.condition.name(), c.witness);
    }
    let loc = check_locality(&sys.pes, depth, LocalityMode::Joint).map_err(|e| e.to_string())?;
    ensure!(loc.outcome == Outcome::BoundedSecure, "locality: {loc:?}");
    let unw = check_unwinding_security(&sys.pes, depth).map_err(|e| e.to_string())?;
    ensure!(unw.outcome == Outcome::BoundedSecure, "unwinding: {unw:?}");
    let steps = capability_properties(10_000, 12, 0xca9)?;
    Ok(format!(
        "{} actions, {} states: DRM-1..6 and 5' hold, local, unwinding BOUNDED_SECURE; 10000 sequences ({steps} steps) guard-sound and confined",
        sys.pes.signature().action_count(),
        sys.pes.state_count()
    ))
}

fn criterion10(out: &Emitted) -> Check {
    let mut r = rng(0x7ee);
    let mut store = TreeStore::new();
    let mut equal_pairs = 0;
    let trees: Vec<_> = (0..10_000).map(|_| random_tree(&mut r, 2, 4)).collect();
    let ids: Vec<_> = trees.iter().map(|t| store.intern(t)).collect();
    for i in 0..trees.len() {
        ensure!(store.expand(ids[i]) == trees[i], "tree {i} does not expand to itself");
        let j = (i * 7919 + 1) % trees.len();
        ensure!((ids[i] == ids[j]) == (trees[i] == trees[j]), "trees {i} and {j}: id and structure disagree");
        equal_pairs += usize::from(trees[i] == trees[j]);
    }
    for (name, text) in corpus::ALL {
        let file = parse_system_file(text).map_err(|e| e.to_string())?;
        let again = parse_system_file(&print_system_file(&file)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(again == file, "{name}: print/parse round trip differs");
    }
    let mut replayed = 0;
    for (name, pes, v) in &out.0 {
        if v.outcome != Outcome::Insecure {
            continue;
        }
        let w = v.witness.as_ref().ok_or(format!("{name} {}: no witness", v.property))?;
        ensure!(w.replay(pes).map_err(|e| e.to_string())?, "{name} {}: witness does not replay", v.property);
        replayed += 1;
    }
    ensure!(replayed >= 6, "only {replayed} witnesses replayed");
    Ok(format!(
        "10000 trees ({} distinct, {equal_pairs} equal pairs); corpus round trip; {replayed} witnesses replay",
        store.len()
    ))
}

fn main() -> ExitCode {
    let mut emitted = Emitted::default();
    let limits = [5, 5, 5, 10, 60, 60, 60, 10, 120, 60];
    let mut failed = 0;
    for n in 1..=10usize {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(|| match n {
            1 => criterion1(&mut emitted),
            2 => criterion2(&mut emitted),
            3 => criterion3(&mut emitted),
            4 => criterion4(&mut emitted),
            5 => criterion5(),
            6 => criterion6(),
            7 => criterion7(),
            8 => criterion8(),
            9 => criterion9(),
            _ => criterion10(&emitted),
        }))
        .unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let limit = Duration::from_secs(limits[n - 1]);
        let result = match result {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; exceeded {}s", limit.as_secs())),
            other => other,
        };
        let secs = elapsed.as_secs_f64();
        match result {
            Ok(detail) => println!("criterion {n:>2}: PASS ({secs:.2}s) {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2}: FAIL ({secs:.2}s) {detail}");
            }
        }
    }
    println!("acceptance: {} of 10 criteria passed", 10 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
