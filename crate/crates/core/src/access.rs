//! Systems with structured state: objects with contents, and per-state
//! observe/alter access sets. Checks the dynamic reference-monitor
//! conditions DRM-1..6 and DRM-5′, derives security from them, and builds
//! the canonical access-control interpretation of a secure system's unfold.
//!
//! Trace-quantified conditions reduce to states: every condition mentions a
//! trace only through the state it reaches. Conditions are checked on the
//! states reachable within the depth bound; step conditions (DRM-2..4) skip
//! frontier states of truncated systems, whose successors are artificial.

use rustc_hash::FxHashMap;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{unfold, ActionId, DomainId, Pes, StateId};
use crate::purge::ta_may_table;
use crate::traces::TraceSpace;
use crate::tree::{TreeId, TreeStore};
use crate::verdict::{Outcome, Verdict};

/// Largest number of objects of a structured system.
pub const MAX_OBJECTS: usize = 128;

/// Object handle, indexing [`StructuredSystem::objects`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ObjectId(pub u16);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A set of objects as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct ObjectSet(pub u128);

impl ObjectSet {
    pub const EMPTY: ObjectSet = ObjectSet(0);

    pub fn contains(self, o: ObjectId) -> bool {
        self.0 >> o.0 & 1 == 1
    }

    pub fn insert(&mut self, o: ObjectId) {
        self.0 |= 1 << o.0;
    }

    pub fn intersection(self, other: ObjectSet) -> ObjectSet {
        ObjectSet(self.0 & other.0)
    }

    pub fn difference(self, other: ObjectSet) -> ObjectSet {
        ObjectSet(self.0 & !other.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = ObjectId> {
        (0..MAX_OBJECTS as u16)
            .filter(move |i| self.0 >> i & 1 == 1)
            .map(ObjectId)
    }
}

impl FromIterator<ObjectId> for ObjectSet {
    fn from_iter<I: IntoIterator<Item = ObjectId>>(iter: I) -> Self {
        let mut s = ObjectSet::EMPTY;
        for o in iter {
            s.insert(o);
        }
        s
    }
}

/// The contents of an object.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Value {
    /// An information tree (interned in the system's tree store).
    Tree(TreeId),
    /// A set of objects (the contents of the `oset` objects).
    Objects(ObjectSet),
    /// Any other value, compared as an opaque string.
    Token(String),
}

/// A system with structured state over a policy-enhanced base system.
#[derive(Clone, Debug)]
pub struct StructuredSystem {
    base: Pes,
    objects: Vec<String>,
    osets: Vec<ObjectId>,
    values: Vec<Value>,
    contents: Vec<u32>,
    observe: Vec<ObjectSet>,
    alter: Vec<ObjectSet>,
    trees: Option<TreeStore>,
    /// Caveats from construction.
    pub notes: Vec<String>,
}

impl StructuredSystem {
    pub fn base(&self) -> &Pes {
        &self.base
    }

    pub fn objects(&self) -> &[String] {
        &self.objects
    }

    pub fn object_id(&self, name: &str) -> Result<ObjectId> {
        self.objects
            .iter()
            .position(|o| o == name)
            .map(|i| ObjectId(i as u16))
            .ok_or_else(|| Error::unknown("object", name))
    }

    /// The object holding the set of objects `u` can observe.
    pub fn oset(&self, u: DomainId) -> ObjectId {
        self.osets[u.index()]
    }

    pub fn contents(&self, o: ObjectId, s: StateId) -> &Value {
        &self.values[self.content_id(o, s) as usize]
    }

    fn content_id(&self, o: ObjectId, s: StateId) -> u32 {
        self.contents[o.index() * self.base.state_count() + s.index()]
    }

    pub fn observe(&self, u: DomainId, s: StateId) -> ObjectSet {
        self.observe[s.index() * self.base.signature().domain_count() + u.index()]
    }

    pub fn alter(&self, u: DomainId, s: StateId) -> ObjectSet {
        self.alter[s.index() * self.base.signature().domain_count() + u.index()]
    }

    /// The tree store backing [`Value::Tree`] contents, if any.
    pub fn trees(&self) -> Option<&TreeStore> {
        self.trees.as_ref()
    }

    /// Renders a value for reports.
    pub fn render_value(&self, v: &Value) -> String {
        match v {
            Value::Tree(t) => match &self.trees {
                Some(store) => store.render(*t, self.base.signature()),
                None => format!("tree#{}", t.0),
            },
            Value::Objects(set) => {
                let names: Vec<&str> = set.iter().map(|o| self.objects[o.index()].as_str()).collect();
                format!("{{{}}}", names.join(","))
            }
            Value::Token(t) => t.clone(),
        }
    }

    /// Checks that `oset(u)` is always observable by `u` and holds exactly
    /// the objects `u` observes.
    pub fn validate(&self) -> Result<()> {
        let sig = self.base.signature();
        for s in self.base.states() {
            for u in sig.domains() {
                let os = self.oset(u);
                let obs = self.observe(u, s);
                if !obs.contains(os) {
                    return Err(Error::Structure(format!(
                        "{} is not observable by {} at {}",
                        self.objects[os.index()],
                        sig.domain_name(u),
                        self.base.state_name(s)
                    )));
                }
                if *self.contents(os, s) != Value::Objects(obs) {
                    return Err(Error::Structure(format!(
                        "contents of {} at {} differ from the objects {} observes",
                        self.objects[os.index()],
                        self.base.state_name(s),
                        sig.domain_name(u)
                    )));
                }
            }
        }
        Ok(())
    }

    /// `s ≈_u t`: every object `u` observes at `s` has equal contents at
    /// `s` and `t`.
    pub fn dynacrel(&self, u: DomainId, s: StateId, t: StateId) -> bool {
        self.observe(u, s)
            .iter()
            .all(|o| self.content_id(o, s) == self.content_id(o, t))
    }

    /// Class keys of `≈_u` over all states: equal keys ⇔ related (given
    /// the structural invariants, which make `≈_u` an equivalence).
    fn class_keys(&self, u: DomainId) -> Vec<u32> {
        let mut index: FxHashMap<(u128, Vec<u32>), u32> = FxHashMap::default();
        self.base
            .states()
            .map(|s| {
                let obs = self.observe(u, s);
                let vals: Vec<u32> = obs.iter().map(|o| self.content_id(o, s)).collect();
                let next = index.len() as u32;
                *index.entry((obs.0, vals)).or_insert(next)
            })
            .collect()
    }
}

/// Incremental construction of a [`StructuredSystem`].
pub struct StructuredBuilder {
    sys: StructuredSystem,
    index: FxHashMap<Value, u32>,
    set: Vec<bool>,
}

impl StructuredBuilder {
    /// Declares the objects of the system; one `oset(U)` object per domain
    /// is appended. Each domain starts out observing only its `oset`,
    /// altering nothing, and every content is the token `⊥`.
    pub fn new<S: Into<String>>(base: Pes, objects: impl IntoIterator<Item = S>) -> Result<Self> {
        let sig = base.signature().clone();
        let mut names: Vec<String> = objects.into_iter().map(Into::into).collect();
        let mut osets = Vec::new();
        for u in sig.domains() {
            osets.push(ObjectId(names.len() as u16));
            names.push(format!("oset({})", sig.domain_name(u)));
        }
        if names.len() > MAX_OBJECTS {
            return Err(Error::Structure(format!(
                "{} objects exceed the limit of {MAX_OBJECTS}",
                names.len()
            )));
        }
        let mut uniq = names.clone();
        uniq.sort();
        uniq.dedup();
        if uniq.len() != names.len() {
            return Err(Error::Structure("duplicate object names".into()));
        }
        let (n, nd, no) = (base.state_count(), sig.domain_count(), names.len());
        let mut index = FxHashMap::default();
        index.insert(Value::Token("⊥".into()), 0);
        let mut observe = vec![ObjectSet::EMPTY; n * nd];
        for (i, o) in observe.iter_mut().enumerate() {
            o.insert(osets[i % nd]);
        }
        Ok(StructuredBuilder {
            sys: StructuredSystem {
                base,
                objects: names,
                osets,
                values: vec![Value::Token("⊥".into())],
                contents: vec![0; no * n],
                observe,
                alter: vec![ObjectSet::EMPTY; n * nd],
                trees: None,
                notes: Vec::new(),
            },
            index,
            set: vec![false; no * n],
        })
    }

    pub fn object_id(&self, name: &str) -> Result<ObjectId> {
        self.sys.object_id(name)
    }

    pub fn oset(&self, u: DomainId) -> ObjectId {
        self.sys.oset(u)
    }

    pub fn set_contents(&mut self, o: ObjectId, s: StateId, v: Value) -> &mut Self {
        let next = self.sys.values.len() as u32;
        let id = *self.index.entry(v.clone()).or_insert(next);
        if id == next {
            self.sys.values.push(v);
        }
        let slot = o.index() * self.sys.base.state_count() + s.index();
        self.sys.contents[slot] = id;
        self.set[slot] = true;
        self
    }

    pub fn set_observe(&mut self, u: DomainId, s: StateId, objs: ObjectSet) -> &mut Self {
        let nd = self.sys.base.signature().domain_count();
        self.sys.observe[s.index() * nd + u.index()] = objs;
        self
    }

    pub fn set_alter(&mut self, u: DomainId, s: StateId, objs: ObjectSet) -> &mut Self {
        let nd = self.sys.base.signature().domain_count();
        self.sys.alter[s.index() * nd + u.index()] = objs;
        self
    }

    pub fn set_trees(&mut self, store: TreeStore) -> &mut Self {
        self.sys.trees = Some(store);
        self
    }

    pub fn note(&mut self, note: impl Into<String>) -> &mut Self {
        self.sys.notes.push(note.into());
        self
    }

    /// Fills the contents of every `oset` object not set explicitly from
    /// the observe sets, then validates the structural invariants.
    pub fn build(mut self) -> Result<StructuredSystem> {
        let sig = self.sys.base.signature().clone();
        let states: Vec<StateId> = self.sys.base.states().collect();
        for u in sig.domains() {
            let os = self.sys.oset(u);
            for s in &states {
                if !self.set[os.index() * states.len() + s.index()] {
                    let v = Value::Objects(self.sys.observe(u, *s));
                    self.set_contents(os, *s, v);
                }
            }
        }
        self.sys.validate()?;
        Ok(self.sys)
    }
}

/// The conditions, in report order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Condition {
    #[serde(rename = "DRM-1")]
    Drm1,
    #[serde(rename = "DRM-2")]
    Drm2,
    #[serde(rename = "DRM-3")]
    Drm3,
    #[serde(rename = "DRM-4")]
    Drm4,
    #[serde(rename = "DRM-5")]
    Drm5,
    #[serde(rename = "DRM-5'")]
    Drm5Strong,
    #[serde(rename = "DRM-6")]
    Drm6,
}

impl Condition {
    pub fn name(self) -> &'static str {
        match self {
            Condition::Drm1 => "DRM-1",
            Condition::Drm2 => "DRM-2",
            Condition::Drm3 => "DRM-3",
            Condition::Drm4 => "DRM-4",
            Condition::Drm5 => "DRM-5",
            Condition::Drm5Strong => "DRM-5'",
            Condition::Drm6 => "DRM-6",
        }
    }
}

/// Evidence that a condition fails. States are named as in the base
/// system (for unfoldings, by their traces).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DrmWitness {
    pub states: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object: Option<String>,
    pub domains: Vec<String>,
}

/// The result of one condition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub outcome: Outcome,
    /// What the condition was quantified over.
    pub scope: String,
    pub witness: Option<DrmWitness>,
}

/// Results for DRM-1..6, plus DRM-5′ when requested.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct DrmReport {
    pub depth: usize,
    pub strong: bool,
    /// Number of states the conditions were checked on.
    pub states: usize,
    /// True when these were all the reachable states and none is a
    /// frontier state, so the checks were exhaustive.
    pub exhaustive: bool,
    pub conditions: Vec<ConditionResult>,
}

impl DrmReport {
    pub fn get(&self, c: Condition) -> Option<&ConditionResult> {
        self.conditions.iter().find(|r| r.condition == c)
    }

    pub fn holds(&self, c: Condition) -> bool {
        self.get(c).is_some_and(|r| r.outcome == Outcome::Holds)
    }

    /// DRM-1 to DRM-6 (with the weak DRM-5) all hold.
    pub fn basic_holds(&self) -> bool {
        [
            Condition::Drm1,
            Condition::Drm2,
            Condition::Drm3,
            Condition::Drm4,
            Condition::Drm5,
            Condition::Drm6,
        ]
        .iter()
        .all(|c| self.holds(*c))
    }
}

/// Checks the reference-monitor conditions on the states reachable within
/// `depth`. With `strong`, DRM-5′ is checked as well (it is never inferred
/// from DRM-5).
pub fn check_drm(sys: &StructuredSystem, depth: usize, strong: bool) -> Result<DrmReport> {
    sys.validate()?;
    let pes = &sys.base;
    let sig = pes.signature();
    let within: Vec<StateId> = pes.reachable_within(depth).into_iter().map(|(s, _)| s).collect();
    let stepping: Vec<StateId> = within.iter().copied().filter(|s| !pes.is_frontier(*s)).collect();
    let exhaustive = within.len() == pes.reachable_states().len() && stepping.len() == within.len();
    let keys: Vec<Vec<u32>> = sig.domains().map(|u| sys.class_keys(u)).collect();
    let key = |u: DomainId, s: StateId| keys[u.index()][s.index()];
    let sname = |s: StateId| pes.state_name(s).to_string();
    let dname = |u: DomainId| sig.domain_name(u).to_string();
    let oname = |o: ObjectId| Some(sys.objects[o.index()].clone());
    let aname = |a: ActionId| Some(sig.action_name(a).to_string());
    let all_scope = format!("{} reachable states within depth {depth}", within.len());
    let step_scope = format!(
        "{} reachable states within depth {depth} with genuine successors, all actions",
        stepping.len()
    );
    let mut results = Vec::new();
    let mut push = |c: Condition, scope: &str, w: Option<DrmWitness>| {
        results.push(ConditionResult {
            condition: c,
            outcome: if w.is_some() { Outcome::Fails } else { Outcome::Holds },
            scope: scope.to_string(),
            witness: w,
        });
    };

    // DRM-1: related states give equal observations.
    let mut w1 = None;
    'drm1: for u in sig.domains() {
        let mut first: FxHashMap<u32, StateId> = FxHashMap::default();
        for s in &within {
            let t = *first.entry(key(u, *s)).or_insert(*s);
            if pes.obs(t, u) != pes.obs(*s, u) {
                w1 = Some(DrmWitness {
                    states: vec![sname(t), sname(*s)],
                    domains: vec![dname(u)],
                    ..Default::default()
                });
                break 'drm1;
            }
        }
    }
    push(Condition::Drm1, &all_scope, w1);

    // DRM-2: an alterable object's new value depends on its old value and
    // on what the actor observes.
    let mut w2 = None;
    'drm2: for a in sig.actions() {
        let d = sig.dom(a);
        let mut first: FxHashMap<(u32, u16, u32), StateId> = FxHashMap::default();
        for s in &stepping {
            for o in sys.alter(d, *s).iter() {
                let k = (key(d, *s), o.0, sys.content_id(o, *s));
                let t = *first.entry(k).or_insert(*s);
                if sys.content_id(o, pes.step(t, a)) != sys.content_id(o, pes.step(*s, a)) {
                    w2 = Some(DrmWitness {
                        states: vec![sname(t), sname(*s)],
                        action: aname(a),
                        object: oname(o),
                        domains: vec![dname(d)],
                    });
                    break 'drm2;
                }
            }
        }
    }
    push(Condition::Drm2, &step_scope, w2);

    // DRM-3: only alterable objects change.
    let mut w3 = None;
    'drm3: for s in &stepping {
        for a in sig.actions() {
            let t = pes.step(*s, a);
            for (i, _) in sys.objects.iter().enumerate() {
                let o = ObjectId(i as u16);
                if sys.content_id(o, t) != sys.content_id(o, *s) && !sys.alter(sig.dom(a), *s).contains(o) {
                    w3 = Some(DrmWitness {
                        states: vec![sname(*s)],
                        action: aname(a),
                        object: oname(o),
                        domains: vec![dname(sig.dom(a))],
                    });
                    break 'drm3;
                }
            }
        }
    }
    push(Condition::Drm3, &step_scope, w3);

    // DRM-4: newly observable objects were observable to the actor.
    let mut w4 = None;
    'drm4: for s in &stepping {
        for a in sig.actions() {
            let (t, d) = (pes.step(*s, a), sig.dom(a));
            for u in sig.domains() {
                let fresh = sys.observe(u, t).difference(sys.observe(u, *s));
                if let Some(o) = fresh.difference(sys.observe(d, *s)).iter().next() {
                    w4 = Some(DrmWitness {
                        states: vec![sname(*s)],
                        action: aname(a),
                        object: oname(o),
                        domains: vec![dname(u)],
                    });
                    break 'drm4;
                }
            }
        }
    }
    push(Condition::Drm4, &step_scope, w4);

    // DRM-5 and DRM-5′: what u observes and v alters is determined by the
    // joint class of u and v (DRM-5 only where v may interfere with u).
    let policy_consistency = |weak: bool| -> Option<DrmWitness> {
        for u in sig.domains() {
            for v in sig.domains() {
                let mut first: FxHashMap<(u32, u32), StateId> = FxHashMap::default();
                for s in &within {
                    if weak && !pes.edge(*s, v, u) {
                        continue;
                    }
                    let t = *first.entry((key(u, *s), key(v, *s))).or_insert(*s);
                    let share = |x: StateId| sys.observe(u, x).intersection(sys.alter(v, x));
                    if share(t) != share(*s) {
                        return Some(DrmWitness {
                            states: vec![sname(t), sname(*s)],
                            domains: vec![dname(u), dname(v)],
                            ..Default::default()
                        });
                    }
                }
            }
        }
        None
    };
    push(Condition::Drm5, &all_scope, policy_consistency(true));
    if strong {
        // Report the violation found first in state order, across all
        // domain pairs, so the witness is the shortest offending pair.
        push(Condition::Drm5Strong, &all_scope, strong_witness(sys, &within, &keys));
    }

    // DRM-6: shared objects are permitted channels.
    let mut w6 = None;
    'drm6: for s in &within {
        for u in sig.domains() {
            for v in sig.domains() {
                let shared = sys.alter(u, *s).intersection(sys.observe(v, *s));
                if !shared.is_empty() && !pes.edge(*s, u, v) {
                    w6 = Some(DrmWitness {
                        states: vec![sname(*s)],
                        object: oname(shared.iter().next().expect("non-empty")),
                        domains: vec![dname(u), dname(v)],
                        ..Default::default()
                    });
                    break 'drm6;
                }
            }
        }
    }
    push(Condition::Drm6, &all_scope, w6);

    Ok(DrmReport {
        depth,
        strong,
        states: within.len(),
        exhaustive,
        conditions: results,
    })
}

/// DRM-5′ violation with the earliest second state (in breadth-first
/// order), then the earliest domain pair `(u, v)`.
fn strong_witness(sys: &StructuredSystem, within: &[StateId], keys: &[Vec<u32>]) -> Option<DrmWitness> {
    let pes = &sys.base;
    let sig = pes.signature();
    let nd = sig.domain_count();
    let mut first: Vec<FxHashMap<(u32, u32), StateId>> = vec![FxHashMap::default(); nd * nd];
    for s in within {
        for u in sig.domains() {
            for v in sig.domains() {
                let k = (keys[u.index()][s.index()], keys[v.index()][s.index()]);
                let t = *first[u.index() * nd + v.index()].entry(k).or_insert(*s);
                let share = |x: StateId| sys.observe(u, x).intersection(sys.alter(v, x));
                if share(t) != share(*s) {
                    return Some(DrmWitness {
                        states: vec![pes.state_name(t).to_string(), pes.state_name(*s).to_string()],
                        domains: vec![sig.domain_name(u).to_string(), sig.domain_name(v).to_string()],
                        ..Default::default()
                    });
                }
            }
        }
    }
    None
}

/// Security verdicts justified by a DRM report: `ta◇` from DRM-1..6 and,
/// with DRM-5′ as well, `ta□`. Certificates are issued only when the
/// conditions were checked on every reachable state; otherwise the verdict
/// is bounded by the depth of the check.
pub fn derive_security_from_drm(report: &DrmReport, sys: &StructuredSystem) -> Vec<Verdict> {
    let positive = if report.exhaustive {
        Outcome::CertifiedSecure
    } else {
        Outcome::BoundedSecure
    };
    let scope_note = if report.exhaustive {
        "the conditions hold on every reachable state".to_string()
    } else {
        format!(
            "the conditions were checked only on the {} states reachable within depth {}",
            report.states, report.depth
        )
    };
    let mut out = Vec::new();
    let depth = (!report.exhaustive).then_some(report.depth);
    let may = if report.basic_holds() {
        Verdict::new("mayta", positive, depth).with_note(scope_note.clone())
    } else {
        Verdict::new("mayta", Outcome::Inconclusive, depth)
            .with_note("a reference-monitor condition fails; no certificate")
    };
    out.push(may);
    let must = if report.basic_holds() && report.holds(Condition::Drm5Strong) {
        Verdict::new("mustta", positive, depth).with_note(scope_note)
    } else if !report.strong {
        Verdict::new("mustta", Outcome::Inconclusive, depth).with_note("DRM-5' was not checked")
    } else {
        Verdict::new("mustta", Outcome::Inconclusive, depth)
            .with_note("DRM-5' or a basic condition fails; no certificate")
    };
    out.push(must);
    if let Some(k) = sys.base.truncated_at() {
        for v in &mut out {
            v.notes.push(format!(
                "the structured system is a depth-{k} unfolding; the verdict concerns traces within it"
            ));
        }
    }
    out
}

/// The canonical access-control interpretation of the depth-`depth`
/// unfold: objects are the domains and their `oset`s, each domain observes
/// itself and its `oset`, alters the domains it may interfere with, and a
/// domain object holds that domain's `ta◇` tree.
pub fn ac_complete_construct(pes: &Pes, depth: usize) -> Result<StructuredSystem> {
    let sig = pes.signature();
    let tree = unfold(pes, depth)?;
    let space = TraceSpace::new(pes, depth)?;
    let mut store = TreeStore::new();
    let table = ta_may_table(&mut store, pes, &space);
    let may = crate::checkers::check_ta_may_security(pes, depth)?;

    let names: Vec<String> = sig.domains().map(|u| sig.domain_name(u).to_string()).collect();
    let mut b = StructuredBuilder::new(tree, names)?;
    if may.is_insecure() {
        b.note(format!(
            "the system is not mayta-secure at depth {depth}; the conditions are expected to fail"
        ));
    }
    let dobj = |u: DomainId| ObjectId(u.0);
    for id in 0..space.len() {
        let s = StateId(id as u32);
        for u in sig.domains() {
            b.set_contents(dobj(u), s, Value::Tree(table.get(u, id)));
            let own: ObjectSet = [dobj(u), b.oset(u)].into_iter().collect();
            b.set_observe(u, s, own);
            let alter: ObjectSet = pes.edge_mask(space.state(id), u).iter().map(dobj).collect();
            b.set_alter(u, s, alter);
        }
    }
    b.set_trees(store);
    b.build()
}
