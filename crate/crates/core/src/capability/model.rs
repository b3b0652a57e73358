//! Tags, capabilities, process state, actions and the transition function.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::model::{DomainId, DomainSet};

/// Process index.
pub type Process = usize;

/// A message value: an index into the configured value alphabet, or `⊥`.
pub type Msg = Option<u16>;

/// A tag: a basic name, or a name labelled with the process that may
/// create it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tag {
    pub name: usize,
    pub owner: Option<Process>,
}

/// `t⁺` (add) or `t⁻` (remove).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Right {
    Add,
    Remove,
}

/// A capability `t⁺` or `t⁻`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Cap {
    pub tag: Tag,
    pub right: Right,
}

/// The processes and basic tag names, fixing the finite tag universe
/// `T = N ∪ {n_p}` and its encoding as bit positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TagUniverse {
    processes: Vec<String>,
    names: Vec<String>,
}

/// Largest tag universe representable (`|N| · (1 + |P|)` tags).
pub const MAX_TAGS: usize = 64;

impl TagUniverse {
    pub fn new(processes: Vec<String>, names: Vec<String>) -> Result<Self> {
        if processes.is_empty() {
            return Err(Error::Capability("at least one process is required".into()));
        }
        if names.len() * (1 + processes.len()) > MAX_TAGS {
            return Err(Error::Capability(format!(
                "{} basic tags and {} processes exceed {MAX_TAGS} tags",
                names.len(),
                processes.len()
            )));
        }
        for list in [&processes, &names] {
            let mut sorted = list.clone();
            sorted.sort();
            sorted.dedup();
            if sorted.len() != list.len() {
                return Err(Error::Capability("duplicate process or tag name".into()));
            }
        }
        Ok(TagUniverse { processes, names })
    }

    pub fn processes(&self) -> &[String] {
        &self.processes
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn process_count(&self) -> usize {
        self.processes.len()
    }

    pub fn process_id(&self, name: &str) -> Result<Process> {
        self.processes
            .iter()
            .position(|p| p == name)
            .ok_or_else(|| Error::unknown("process", name))
    }

    /// Every tag: for each basic name, the basic tag and then one tag per
    /// process.
    pub fn tags(&self) -> Vec<Tag> {
        (0..self.names.len())
            .flat_map(|n| {
                std::iter::once(None)
                    .chain((0..self.processes.len()).map(Some))
                    .map(move |owner| Tag { name: n, owner })
            })
            .collect()
    }

    /// Every capability, `t⁺` before `t⁻`, tags in [`TagUniverse::tags`] order.
    pub fn caps(&self) -> Vec<Cap> {
        self.tags()
            .into_iter()
            .flat_map(|tag| [Right::Add, Right::Remove].map(|right| Cap { tag, right }))
            .collect()
    }

    pub fn tag_bit(&self, t: Tag) -> u32 {
        (t.name * (1 + self.processes.len()) + t.owner.map_or(0, |p| p + 1)) as u32
    }

    pub fn cap_bit(&self, c: Cap) -> u32 {
        2 * self.tag_bit(c.tag) + u32::from(c.right == Right::Remove)
    }

    fn tag_of_bit(&self, bit: u32) -> Tag {
        let stride = 1 + self.processes.len();
        let (name, k) = (bit as usize / stride, bit as usize % stride);
        Tag {
            name,
            owner: k.checked_sub(1),
        }
    }

    pub fn tag_name(&self, t: Tag) -> String {
        match t.owner {
            None => self.names[t.name].clone(),
            Some(p) => format!("{}_{}", self.names[t.name], self.processes[p]),
        }
    }

    pub fn cap_name(&self, c: Cap) -> String {
        let sign = match c.right {
            Right::Add => '+',
            Right::Remove => '-',
        };
        format!("{}{sign}", self.tag_name(c.tag))
    }

    /// Parses `n` (basic) or `n_p` (labelled with process `p`).
    pub fn parse_tag(&self, text: &str) -> Result<Tag> {
        if let Some(name) = self.names.iter().position(|n| n == text) {
            return Ok(Tag { name, owner: None });
        }
        for (i, n) in self.names.iter().enumerate() {
            if let Some(rest) = text.strip_prefix(n.as_str()).and_then(|r| r.strip_prefix('_')) {
                if let Ok(p) = self.process_id(rest) {
                    return Ok(Tag {
                        name: i,
                        owner: Some(p),
                    });
                }
            }
        }
        Err(Error::unknown("tag", text))
    }

    /// Parses `t+` or `t-`.
    pub fn parse_cap(&self, text: &str) -> Result<Cap> {
        let (tag, right) = if let Some(t) = text.strip_suffix('+') {
            (t, Right::Add)
        } else if let Some(t) = text.strip_suffix('-') {
            (t, Right::Remove)
        } else {
            return Err(Error::Capability(format!(
                "capability `{text}` must end in `+` or `-`"
            )));
        };
        Ok(Cap {
            tag: self.parse_tag(tag)?,
            right,
        })
    }

    pub fn render_tags(&self, set: TagSet) -> String {
        let names: Vec<String> = (0..MAX_TAGS as u32)
            .filter(|b| set.0 >> b & 1 == 1)
            .map(|b| self.tag_name(self.tag_of_bit(b)))
            .collect();
        format!("{{{}}}", names.join(","))
    }

    pub fn render_caps(&self, set: CapSet) -> String {
        let names: Vec<String> = (0..2 * MAX_TAGS as u32)
            .filter(|b| set.0 >> b & 1 == 1)
            .map(|b| {
                let right = if b % 2 == 0 { Right::Add } else { Right::Remove };
                self.cap_name(Cap {
                    tag: self.tag_of_bit(b / 2),
                    right,
                })
            })
            .collect();
        format!("{{{}}}", names.join(","))
    }

    /// Tags of a set, in bit order.
    pub fn tags_of(&self, set: TagSet) -> Vec<Tag> {
        (0..MAX_TAGS as u32)
            .filter(|b| set.0 >> b & 1 == 1)
            .map(|b| self.tag_of_bit(b))
            .collect()
    }
}

/// A set of tags (a security level) as a bitmask over the universe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TagSet(pub u64);

impl TagSet {
    pub fn is_subset(self, other: TagSet) -> bool {
        self.0 & !other.0 == 0
    }
}

/// A set of capabilities as a bitmask over the universe.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CapSet(pub u128);

/// The objects of one process: its policy state `S_p`, `O_p`, and its data
/// `in_p`, `m_p` and named data slots.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct ProcessState {
    pub secrecy: TagSet,
    pub caps: CapSet,
    pub inbox: Vec<Msg>,
    pub message: Msg,
    pub data: Vec<Msg>,
}

/// A global state: one [`ProcessState`] per process.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct CapState {
    pub procs: Vec<ProcessState>,
}

impl CapState {
    /// A state with empty secrecy and capability sets, empty inboxes, `⊥`
    /// messages and `slots` data slots per process, all `⊥`.
    pub fn empty(processes: usize, slots: usize) -> Self {
        CapState {
            procs: vec![
                ProcessState {
                    data: vec![None; slots],
                    ..Default::default()
                };
                processes
            ],
        }
    }

    /// Candidate initial states mention only basic tags.
    pub fn validate_initial(&self, universe: &TagUniverse) -> Result<()> {
        for (p, st) in self.procs.iter().enumerate() {
            if let Some(t) = universe.tags_of(st.secrecy).into_iter().find(|t| t.owner.is_some()) {
                return Err(Error::Capability(format!(
                    "initial secrecy set of {} mentions the process tag {}",
                    universe.processes()[p],
                    universe.tag_name(t)
                )));
            }
            let basic_caps: u128 = universe
                .caps()
                .into_iter()
                .filter(|c| c.tag.owner.is_none())
                .map(|c| 1u128 << universe.cap_bit(c))
                .sum();
            if st.caps.0 & !basic_caps != 0 {
                return Err(Error::Capability(format!(
                    "initial capability set of {} mentions a process tag",
                    universe.processes()[p]
                )));
            }
        }
        Ok(())
    }
}

/// What a data action may read: the objects of the acting process.
#[derive(Clone, Copy, Debug)]
pub struct ProcessView<'a> {
    pub secrecy: TagSet,
    pub caps: CapSet,
    pub inbox: &'a [Msg],
    pub message: Msg,
    pub data: &'a [Msg],
}

/// What a data action may write: the new message buffer and data slots of
/// the acting process.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataUpdate {
    pub message: Msg,
    pub data: Vec<Msg>,
}

/// A deterministic data action. It sees only the acting process's objects
/// and returns only that process's new data, so it cannot read or write
/// anything else.
pub trait DataAction: Send + Sync + fmt::Debug {
    /// Short name, e.g. `set_message(1)`.
    fn name(&self) -> String;
    fn apply(&self, view: &ProcessView) -> DataUpdate;
}

/// `m_p := v`.
#[derive(Clone, Debug)]
pub struct SetMessage {
    pub value: Msg,
    pub label: String,
}

impl DataAction for SetMessage {
    fn name(&self) -> String {
        format!("set_message({})", self.label)
    }

    fn apply(&self, view: &ProcessView) -> DataUpdate {
        DataUpdate {
            message: self.value,
            data: view.data.to_vec(),
        }
    }
}

/// `m_p :=` the last received message, or `⊥`.
#[derive(Clone, Debug)]
pub struct Forward;

impl DataAction for Forward {
    fn name(&self) -> String {
        "forward".into()
    }

    fn apply(&self, view: &ProcessView) -> DataUpdate {
        DataUpdate {
            message: view.inbox.last().copied().flatten(),
            data: view.data.to_vec(),
        }
    }
}

/// Copies `m_p` into a data slot.
#[derive(Clone, Debug)]
pub struct Store {
    pub slot: usize,
    pub label: String,
}

impl DataAction for Store {
    fn name(&self) -> String {
        format!("store({})", self.label)
    }

    fn apply(&self, view: &ProcessView) -> DataUpdate {
        let mut data = view.data.to_vec();
        data[self.slot] = view.message;
        DataUpdate {
            message: view.message,
            data,
        }
    }
}

/// Copies a data slot into `m_p`.
#[derive(Clone, Debug)]
pub struct Load {
    pub slot: usize,
    pub label: String,
}

impl DataAction for Load {
    fn name(&self) -> String {
        format!("load({})", self.label)
    }

    fn apply(&self, view: &ProcessView) -> DataUpdate {
        DataUpdate {
            message: view.data[self.slot],
            data: view.data.to_vec(),
        }
    }
}

/// An action `p.a`; its domain is always the acting process.
#[derive(Clone, Debug)]
pub enum CapAction {
    Data {
        process: Process,
        action: Arc<dyn DataAction>,
    },
    /// Creates `n_p` if needed and grants `p` the given rights over it.
    AddCap {
        process: Process,
        add: bool,
        remove: bool,
        name: usize,
    },
    DropCap { process: Process, cap: Cap },
    AddTag { process: Process, tag: Tag },
    RemoveTag { process: Process, tag: Tag },
    SendMessage { process: Process, to: Process },
    SendCap { process: Process, cap: Cap, to: Process },
}

impl CapAction {
    /// The acting process.
    pub fn process(&self) -> Process {
        match self {
            CapAction::Data { process, .. }
            | CapAction::AddCap { process, .. }
            | CapAction::DropCap { process, .. }
            | CapAction::AddTag { process, .. }
            | CapAction::RemoveTag { process, .. }
            | CapAction::SendMessage { process, .. }
            | CapAction::SendCap { process, .. } => *process,
        }
    }

    /// Name used as the action identifier, e.g. `p:send_cap(n_p+,q)`.
    pub fn name(&self, u: &TagUniverse) -> String {
        let p = &u.processes()[self.process()];
        let body = match self {
            CapAction::Data { action, .. } => action.name(),
            CapAction::AddCap {
                add, remove, name, ..
            } => {
                let rights = format!("{}{}", if *add { "+" } else { "" }, if *remove { "-" } else { "" });
                format!("add_cap({rights},{})", u.names()[*name])
            }
            CapAction::DropCap { cap, .. } => format!("drop_cap({})", u.cap_name(*cap)),
            CapAction::AddTag { tag, .. } => format!("add_tag({})", u.tag_name(*tag)),
            CapAction::RemoveTag { tag, .. } => format!("remove_tag({})", u.tag_name(*tag)),
            CapAction::SendMessage { to, .. } => format!("send_message_to({})", u.processes()[*to]),
            CapAction::SendCap { cap, to, .. } => {
                format!("send_cap({},{})", u.cap_name(*cap), u.processes()[*to])
            }
        };
        format!("{p}:{body}")
    }
}

/// Applies one action. Every action is enabled; a failing guard leaves the
/// state unchanged.
pub fn cap_step(u: &TagUniverse, state: &CapState, action: &CapAction) -> CapState {
    let mut next = state.clone();
    let p = action.process();
    let flows = |q: Process| state.procs[p].secrecy.is_subset(state.procs[q].secrecy);
    match action {
        CapAction::Data { action, .. } => {
            let own = &state.procs[p];
            let view = ProcessView {
                secrecy: own.secrecy,
                caps: own.caps,
                inbox: &own.inbox,
                message: own.message,
                data: &own.data,
            };
            let update = action.apply(&view);
            let slot = &mut next.procs[p];
            slot.message = update.message;
            // Keep the slot layout even if an action returns a malformed update.
            for (i, v) in slot.data.iter_mut().enumerate() {
                *v = update.data.get(i).copied().flatten();
            }
        }
        CapAction::AddCap {
            add, remove, name, ..
        } => {
            let tag = Tag {
                name: *name,
                owner: Some(p),
            };
            for (wanted, right) in [(*add, Right::Add), (*remove, Right::Remove)] {
                if wanted {
                    next.procs[p].caps.0 |= 1 << u.cap_bit(Cap { tag, right });
                }
            }
        }
        CapAction::DropCap { cap, .. } => next.procs[p].caps.0 &= !(1 << u.cap_bit(*cap)),
        CapAction::AddTag { tag, .. } => {
            let plus = Cap {
                tag: *tag,
                right: Right::Add,
            };
            if state.procs[p].caps.0 >> u.cap_bit(plus) & 1 == 1 {
                next.procs[p].secrecy.0 |= 1 << u.tag_bit(*tag);
            }
        }
        CapAction::RemoveTag { tag, .. } => {
            let minus = Cap {
                tag: *tag,
                right: Right::Remove,
            };
            if state.procs[p].caps.0 >> u.cap_bit(minus) & 1 == 1 {
                next.procs[p].secrecy.0 &= !(1 << u.tag_bit(*tag));
            }
        }
        CapAction::SendMessage { to, .. } => {
            if flows(*to) {
                let m = state.procs[p].message;
                next.procs[*to].inbox.push(m);
            }
        }
        CapAction::SendCap { cap, to, .. } => {
            if flows(*to) && state.procs[p].caps.0 >> u.cap_bit(*cap) & 1 == 1 {
                next.procs[*to].caps.0 |= 1 << u.cap_bit(*cap);
            }
        }
    }
    next
}

/// The associated policy at a state: `p ↣ q` iff `S_p ⊆ S_q`. Row `p` is
/// the set of processes `p` may send to.
pub fn associated_policy(state: &CapState) -> Vec<DomainSet> {
    let n = state.procs.len();
    (0..n)
        .map(|p| {
            (0..n)
                .filter(|q| state.procs[p].secrecy.is_subset(state.procs[*q].secrecy))
                .map(|q| DomainId(q as u16))
                .collect()
        })
        .collect()
}
