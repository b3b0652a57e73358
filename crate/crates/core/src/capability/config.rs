//! Capability configurations (`.cap`) and replay scripts (`.trace`).
//!
//! A configuration is line-oriented, `#` starts a comment:
//!
//! ```text
//! processes: p q          # the processes, which are also the domains
//! tags: n                 # basic tag names
//! values: 1               # message values (default: 1)
//! slots: x                # named data slots of every process (optional)
//! secrecy q: n            # initial S_q (basic tags only)
//! caps q: n+ n-           # initial O_q (basic tags only)
//! alphabet: full          # every action form over the finite universe
//! action: p forward       # further actions, in script syntax
//! obs p: inbox            # default|secrecy|capabilities|inbox|message|full|constant
//! ```
//!
//! A script lists one action per line (`p add_tag n_p`, `p send_cap n_p+ q`,
//! or the identifier form `p:add_tag(n_p)`), interleaved with expectations:
//! `expect p secrecy: n_p`, `expect q caps: n_p+`, `expect q inbox: 1`,
//! `expect p message: 1`, `expect edge p q`, `expect noedge p q`.

use std::sync::Arc;

use serde::Serialize;

use super::model::{
    associated_policy, cap_step, CapAction, CapSet, CapState, Forward, Load, Msg, Process,
    ProcessState, SetMessage, Store, TagSet, TagUniverse,
};
use crate::error::{Error, Result};
use crate::model::DomainId;

/// What a process observes. Every mode reads only the process's own
/// objects.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObsMode {
    /// `(S_p, O_p, last element of in_p or ⊥)`.
    Default,
    Secrecy,
    Capabilities,
    Inbox,
    Message,
    /// Every object of the process.
    Full,
    Constant,
}

impl ObsMode {
    fn parse(text: &str) -> Option<Self> {
        Some(match text {
            "default" => ObsMode::Default,
            "secrecy" => ObsMode::Secrecy,
            "capabilities" => ObsMode::Capabilities,
            "inbox" => ObsMode::Inbox,
            "message" => ObsMode::Message,
            "full" => ObsMode::Full,
            "constant" => ObsMode::Constant,
            _ => return None,
        })
    }
}

/// A finite capability system: universe, value alphabet, data slots,
/// initial state, action alphabet and observation functions.
#[derive(Clone, Debug)]
pub struct CapabilityConfig {
    pub universe: TagUniverse,
    pub values: Vec<String>,
    pub slots: Vec<String>,
    pub initial: CapState,
    pub alphabet: Vec<CapAction>,
    pub obs: Vec<ObsMode>,
}

impl CapabilityConfig {
    /// A configuration with empty initial sets, default observations and
    /// the full alphabet.
    pub fn new(processes: &[&str], tags: &[&str], values: &[&str]) -> Result<Self> {
        let universe = TagUniverse::new(
            processes.iter().map(|s| s.to_string()).collect(),
            tags.iter().map(|s| s.to_string()).collect(),
        )?;
        let values: Vec<String> = values.iter().map(|s| s.to_string()).collect();
        let alphabet = full_alphabet(&universe, &values);
        Ok(CapabilityConfig {
            initial: CapState::empty(processes.len(), 0),
            obs: vec![ObsMode::Default; processes.len()],
            universe,
            values,
            slots: Vec::new(),
            alphabet,
        })
    }

    pub fn process_count(&self) -> usize {
        self.universe.process_count()
    }

    pub fn render_msg(&self, m: Msg) -> String {
        match m {
            None => "⊥".into(),
            Some(v) => self.values[v as usize].clone(),
        }
    }

    fn parse_msg(&self, text: &str) -> Result<Msg> {
        if text == "⊥" || text == "_" {
            return Ok(None);
        }
        self.values
            .iter()
            .position(|v| v == text)
            .map(|i| Some(i as u16))
            .ok_or_else(|| Error::unknown("value", text))
    }

    fn render_seq(&self, ms: &[Msg]) -> String {
        let parts: Vec<String> = ms.iter().map(|m| self.render_msg(*m)).collect();
        parts.join(".")
    }

    /// The observation of process `p` in `state`.
    pub fn observe(&self, p: Process, state: &CapState) -> String {
        let st = &state.procs[p];
        let u = &self.universe;
        match self.obs[p] {
            ObsMode::Default => format!(
                "S={};O={};last={}",
                u.render_tags(st.secrecy),
                u.render_caps(st.caps),
                self.render_msg(st.inbox.last().copied().flatten())
            ),
            ObsMode::Secrecy => u.render_tags(st.secrecy),
            ObsMode::Capabilities => u.render_caps(st.caps),
            ObsMode::Inbox => format!("[{}]", self.render_seq(&st.inbox)),
            ObsMode::Message => self.render_msg(st.message),
            ObsMode::Full => self.render_process(p, st),
            ObsMode::Constant => "-".into(),
        }
    }

    /// One process's objects, without whitespace.
    pub fn render_process(&self, p: Process, st: &ProcessState) -> String {
        let u = &self.universe;
        let mut out = format!(
            "{}(S={};O={};in={};m={}",
            u.processes()[p],
            u.render_tags(st.secrecy),
            u.render_caps(st.caps),
            self.render_seq(&st.inbox),
            self.render_msg(st.message)
        );
        for (name, v) in self.slots.iter().zip(&st.data) {
            out.push_str(&format!(";{name}={}", self.render_msg(*v)));
        }
        out.push(')');
        out
    }

    /// A whole state, used as the state name in built systems.
    pub fn render_state(&self, state: &CapState) -> String {
        let parts: Vec<String> = state
            .procs
            .iter()
            .enumerate()
            .map(|(p, st)| self.render_process(p, st))
            .collect();
        parts.join("|")
    }

    /// Parses one action in script syntax (`p add_tag n_p`) or identifier
    /// syntax (`p:add_tag(n_p)`).
    pub fn parse_action(&self, text: &str) -> Result<CapAction> {
        let normal: String = text
            .chars()
            .map(|c| if matches!(c, ':' | '(' | ')' | ',') { ' ' } else { c })
            .collect();
        let words: Vec<&str> = normal.split_whitespace().collect();
        let bad = || Error::Capability(format!("malformed action `{}`", text.trim()));
        let (&proc_name, rest) = words.split_first().ok_or_else(bad)?;
        let (&verb, args) = rest.split_first().ok_or_else(bad)?;
        let u = &self.universe;
        let process = u.process_id(proc_name)?;
        let arity = |n: usize| if args.len() == n { Ok(()) } else { Err(bad()) };
        let slot = |name: &str| {
            self.slots
                .iter()
                .position(|s| s == name)
                .ok_or_else(|| Error::unknown("slot", name))
        };
        Ok(match verb {
            "set_message" => {
                arity(1)?;
                CapAction::Data {
                    process,
                    action: Arc::new(SetMessage {
                        value: self.parse_msg(args[0])?,
                        label: args[0].to_string(),
                    }),
                }
            }
            "forward" => {
                arity(0)?;
                CapAction::Data {
                    process,
                    action: Arc::new(Forward),
                }
            }
            "store" | "load" => {
                arity(1)?;
                let (slot, label) = (slot(args[0])?, args[0].to_string());
                let action: Arc<dyn super::model::DataAction> = if verb == "store" {
                    Arc::new(Store { slot, label })
                } else {
                    Arc::new(Load { slot, label })
                };
                CapAction::Data { process, action }
            }
            "add_cap" => {
                arity(2)?;
                let rights = args[0];
                if rights.is_empty() || !rights.chars().all(|c| c == '+' || c == '-') {
                    return Err(Error::Capability(format!("rights `{rights}` must be a subset of +-")));
                }
                let name = u
                    .names()
                    .iter()
                    .position(|n| n == args[1])
                    .ok_or_else(|| Error::unknown("basic tag", args[1]))?;
                CapAction::AddCap {
                    process,
                    add: rights.contains('+'),
                    remove: rights.contains('-'),
                    name,
                }
            }
            "drop_cap" => {
                arity(1)?;
                CapAction::DropCap {
                    process,
                    cap: u.parse_cap(args[0])?,
                }
            }
            "add_tag" | "remove_tag" => {
                arity(1)?;
                let tag = u.parse_tag(args[0])?;
                if verb == "add_tag" {
                    CapAction::AddTag { process, tag }
                } else {
                    CapAction::RemoveTag { process, tag }
                }
            }
            "send_message_to" => {
                arity(1)?;
                CapAction::SendMessage {
                    process,
                    to: u.process_id(args[0])?,
                }
            }
            "send_cap" => {
                arity(2)?;
                CapAction::SendCap {
                    process,
                    cap: u.parse_cap(args[0])?,
                    to: u.process_id(args[1])?,
                }
            }
            _ => return Err(Error::Capability(format!("unknown action form `{verb}`"))),
        })
    }
}

/// Every action form over the universe: per process, `set_message(v)` for
/// each value, `add_cap` with each non-empty rights set for each basic
/// name, `drop_cap` for each capability, `add_tag`/`remove_tag` for each
/// tag, `send_message_to` every other process and `send_cap` of every
/// capability to every other process.
pub fn full_alphabet(u: &TagUniverse, values: &[String]) -> Vec<CapAction> {
    let n = u.process_count();
    let mut out = Vec::new();
    for process in 0..n {
        for (i, v) in values.iter().enumerate() {
            out.push(CapAction::Data {
                process,
                action: Arc::new(SetMessage {
                    value: Some(i as u16),
                    label: v.clone(),
                }),
            });
        }
        for name in 0..u.names().len() {
            for (add, remove) in [(true, false), (false, true), (true, true)] {
                out.push(CapAction::AddCap {
                    process,
                    add,
                    remove,
                    name,
                });
            }
        }
        for cap in u.caps() {
            out.push(CapAction::DropCap { process, cap });
        }
        for tag in u.tags() {
            out.push(CapAction::AddTag { process, tag });
        }
        for tag in u.tags() {
            out.push(CapAction::RemoveTag { process, tag });
        }
        for to in (0..n).filter(|q| *q != process) {
            out.push(CapAction::SendMessage { process, to });
        }
        for cap in u.caps() {
            for to in (0..n).filter(|q| *q != process) {
                out.push(CapAction::SendCap { process, cap, to });
            }
        }
    }
    out
}

struct Line<'a> {
    number: usize,
    raw: &'a str,
}

impl Line<'_> {
    fn error(&self, message: impl Into<String>) -> Error {
        let column = self.raw.len() - self.raw.trim_start().len() + 1;
        Error::parse(self.number, column, message)
    }

    fn wrap(&self, e: Error) -> Error {
        match e {
            Error::Parse { .. } => e,
            other => self.error(other.to_string()),
        }
    }
}

fn lines(text: &str) -> impl Iterator<Item = (Line<'_>, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let content = raw.split('#').next().unwrap_or("").trim();
        (!content.is_empty()).then_some((Line { number: i + 1, raw }, content))
    })
}

fn split_head(line: &Line, content: &str) -> Result<(Vec<String>, Vec<String>)> {
    let colon = content
        .find(':')
        .ok_or_else(|| line.error("expected `keyword: ...`"))?;
    let head = content[..colon].split_whitespace().map(String::from).collect();
    let body = content[colon + 1..].split_whitespace().map(String::from).collect();
    Ok((head, body))
}

/// Parses a `.cap` configuration.
pub fn parse_capability(text: &str) -> Result<CapabilityConfig> {
    let mut processes: Option<Vec<String>> = None;
    let mut tags: Vec<String> = Vec::new();
    let mut values: Option<Vec<String>> = None;
    let mut slots: Vec<String> = Vec::new();
    // Universe-defining keywords first, so the rest may refer to them.
    for (line, content) in lines(text) {
        let (head, body) = split_head(&line, content)?;
        match head.first().map(String::as_str) {
            Some("processes") => processes = Some(body),
            Some("tags") => tags = body,
            Some("values") => values = Some(body),
            Some("slots") => slots = body,
            Some("secrecy" | "caps" | "alphabet" | "action" | "obs") => {}
            Some(other) => return Err(line.error(format!("unknown keyword `{other}`"))),
            None => return Err(line.error("missing keyword")),
        }
    }
    let processes = processes.ok_or_else(|| Error::parse(1, 1, "missing `processes:` line"))?;
    let universe = TagUniverse::new(processes, tags)?;
    let values = values.unwrap_or_else(|| vec!["1".into()]);
    let n = universe.process_count();
    let mut config = CapabilityConfig {
        initial: CapState::empty(n, slots.len()),
        obs: vec![ObsMode::Default; n],
        alphabet: Vec::new(),
        universe,
        values,
        slots,
    };
    let mut full = false;
    let mut extra = Vec::new();
    for (line, content) in lines(text) {
        let (head, body) = split_head(&line, content)?;
        let target = || -> Result<Process> {
            let name = head.get(1).ok_or_else(|| line.error("expected a process name before `:`"))?;
            config.universe.process_id(name).map_err(|e| line.wrap(e))
        };
        match head[0].as_str() {
            "secrecy" => {
                let p = target()?;
                let mut set = TagSet::default();
                for t in &body {
                    let tag = config.universe.parse_tag(t).map_err(|e| line.wrap(e))?;
                    set.0 |= 1 << config.universe.tag_bit(tag);
                }
                config.initial.procs[p].secrecy = set;
            }
            "caps" => {
                let p = target()?;
                let mut set = CapSet::default();
                for c in &body {
                    let cap = config.universe.parse_cap(c).map_err(|e| line.wrap(e))?;
                    set.0 |= 1 << config.universe.cap_bit(cap);
                }
                config.initial.procs[p].caps = set;
            }
            "obs" => {
                let p = target()?;
                let mode = body
                    .first()
                    .and_then(|m| ObsMode::parse(m))
                    .ok_or_else(|| line.error("expected an observation mode"))?;
                config.obs[p] = mode;
            }
            "alphabet" => match body.first().map(String::as_str) {
                Some("full") => full = true,
                Some("none") => full = false,
                _ => return Err(line.error("expected `full` or `none`")),
            },
            "action" => extra.push(config.parse_action(&body.join(" ")).map_err(|e| line.wrap(e))?),
            _ => {}
        }
    }
    config.initial.validate_initial(&config.universe)?;
    if full {
        config.alphabet = full_alphabet(&config.universe, &config.values);
    }
    config.alphabet.extend(extra);
    Ok(config)
}

/// One line of a replay script.
#[derive(Clone, Debug)]
pub enum ScriptItem {
    Action(usize, CapAction),
    Expect(usize, Expectation),
}

/// A checked fact about the current state.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expectation {
    Secrecy(Process, TagSet),
    Caps(Process, CapSet),
    Inbox(Process, Vec<Msg>),
    Message(Process, Msg),
    Edge(Process, Process, bool),
}

/// Parses a `.trace` script against a configuration.
pub fn parse_script(config: &CapabilityConfig, text: &str) -> Result<Vec<ScriptItem>> {
    let u = &config.universe;
    let mut out = Vec::new();
    for (line, content) in lines(text) {
        let Some(rest) = content.strip_prefix("expect ") else {
            out.push(ScriptItem::Action(
                line.number,
                config.parse_action(content).map_err(|e| line.wrap(e))?,
            ));
            continue;
        };
        let words: Vec<&str> = rest.split_whitespace().collect();
        let exp = match words.as_slice() {
            [kind @ ("edge" | "noedge"), p, q] => Expectation::Edge(
                u.process_id(p).map_err(|e| line.wrap(e))?,
                u.process_id(q).map_err(|e| line.wrap(e))?,
                *kind == "edge",
            ),
            [p, field, items @ ..] if field.ends_with(':') => {
                let p = u.process_id(p).map_err(|e| line.wrap(e))?;
                match field.trim_end_matches(':') {
                    "secrecy" => {
                        let mut set = TagSet::default();
                        for t in items {
                            set.0 |= 1 << u.tag_bit(u.parse_tag(t).map_err(|e| line.wrap(e))?);
                        }
                        Expectation::Secrecy(p, set)
                    }
                    "caps" => {
                        let mut set = CapSet::default();
                        for c in items {
                            set.0 |= 1 << u.cap_bit(u.parse_cap(c).map_err(|e| line.wrap(e))?);
                        }
                        Expectation::Caps(p, set)
                    }
                    "inbox" => Expectation::Inbox(
                        p,
                        items
                            .iter()
                            .map(|m| config.parse_msg(m))
                            .collect::<Result<_>>()
                            .map_err(|e| line.wrap(e))?,
                    ),
                    "message" => {
                        let [m] = items else {
                            return Err(line.error("expected one value"));
                        };
                        Expectation::Message(p, config.parse_msg(m).map_err(|e| line.wrap(e))?)
                    }
                    other => return Err(line.error(format!("unknown field `{other}`"))),
                }
            }
            _ => return Err(line.error("malformed expectation")),
        };
        out.push(ScriptItem::Expect(line.number, exp));
    }
    Ok(out)
}

/// One replayed action with the resulting state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ReplayStep {
    pub line: usize,
    pub action: String,
    /// False when a guard blocked the action (the state is unchanged).
    pub changed: bool,
    pub state: String,
    /// Edges `p ↣ q` between distinct processes after the step.
    pub policy: Vec<(String, String)>,
}

/// The outcome of replaying a script.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Replay {
    pub initial: String,
    pub steps: Vec<ReplayStep>,
    /// Expectations that did not hold, as `line: message`.
    pub failures: Vec<String>,
    pub expectations: usize,
}

impl Replay {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

fn policy_pairs(config: &CapabilityConfig, s: &CapState) -> Vec<(String, String)> {
    let names = config.universe.processes();
    associated_policy(s)
        .iter()
        .enumerate()
        .flat_map(|(p, row)| {
            row.iter()
                .filter(move |q| q.index() != p)
                .map(move |q| (names[p].clone(), names[q.index()].clone()))
        })
        .collect()
}

/// Replays a script from the configuration's initial state.
pub fn replay(config: &CapabilityConfig, script: &[ScriptItem]) -> Replay {
    let u = &config.universe;
    let mut state = config.initial.clone();
    let mut out = Replay {
        initial: config.render_state(&state),
        steps: Vec::new(),
        failures: Vec::new(),
        expectations: 0,
    };
    for item in script {
        match item {
            ScriptItem::Action(line, a) => {
                let next = cap_step(u, &state, a);
                let changed = next != state;
                state = next;
                out.steps.push(ReplayStep {
                    line: *line,
                    action: a.name(u),
                    changed,
                    state: config.render_state(&state),
                    policy: policy_pairs(config, &state),
                });
            }
            ScriptItem::Expect(line, e) => {
                out.expectations += 1;
                let name = |p: &Process| &u.processes()[*p];
                let failure = match e {
                    Expectation::Secrecy(p, want) => (state.procs[*p].secrecy != *want).then(|| {
                        format!(
                            "secrecy of {} is {}, expected {}",
                            name(p),
                            u.render_tags(state.procs[*p].secrecy),
                            u.render_tags(*want)
                        )
                    }),
                    Expectation::Caps(p, want) => (state.procs[*p].caps != *want).then(|| {
                        format!(
                            "capabilities of {} are {}, expected {}",
                            name(p),
                            u.render_caps(state.procs[*p].caps),
                            u.render_caps(*want)
                        )
                    }),
                    Expectation::Inbox(p, want) => (state.procs[*p].inbox != *want).then(|| {
                        format!(
                            "inbox of {} is [{}], expected [{}]",
                            name(p),
                            config.render_seq(&state.procs[*p].inbox),
                            config.render_seq(want)
                        )
                    }),
                    Expectation::Message(p, want) => (state.procs[*p].message != *want).then(|| {
                        format!(
                            "message of {} is {}, expected {}",
                            name(p),
                            config.render_msg(state.procs[*p].message),
                            config.render_msg(*want)
                        )
                    }),
                    Expectation::Edge(p, q, want) => {
                        let has = associated_policy(&state)[*p].contains(DomainId(*q as u16));
                        (has != *want).then(|| {
                            format!(
                                "edge {} to {} is {}, expected {}",
                                name(p),
                                name(q),
                                if has { "present" } else { "absent" },
                                if *want { "present" } else { "absent" }
                            )
                        })
                    }
                };
                if let Some(f) = failure {
                    out.failures.push(format!("line {line}: {f}"));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const CONFIG: &str = "processes: p q\ntags: n\nvalues: 1 2\nslots: x\n\
                          secrecy q: n\ncaps q: n+ n-\nalphabet: full\naction: p forward\nobs p: inbox\n";

    #[test]
    fn parses_configuration() {
        let c = parse_capability(CONFIG).unwrap();
        assert_eq!(c.values, vec!["1", "2"]);
        assert_eq!(c.universe.render_tags(c.initial.procs[1].secrecy), "{n}");
        assert_eq!(c.universe.render_caps(c.initial.procs[1].caps), "{n+,n-}");
        assert_eq!(c.obs, vec![ObsMode::Inbox, ObsMode::Default]);
        // 2 values + 3 add_cap + 6 drop_cap + 3 add_tag + 3 remove_tag + 1 send + 6 send_cap.
        assert_eq!(c.alphabet.len(), 2 * 24 + 1);
        assert_eq!(c.alphabet.last().unwrap().name(&c.universe), "p:forward");
        let names: Vec<String> = c.alphabet.iter().map(|a| a.name(&c.universe)).collect();
        let mut uniq = names.clone();
        uniq.sort();
        uniq.dedup();
        assert_eq!(uniq.len(), names.len());
        for n in &names {
            assert_eq!(&c.parse_action(n).unwrap().name(&c.universe), n);
        }
    }

    #[test]
    fn rejects_process_tags_initially() {
        let err = parse_capability("processes: p q\ntags: n\nsecrecy p: n_q\n").unwrap_err();
        assert!(matches!(err, Error::Capability(_)), "{err}");
        let err = parse_capability("processes: p\ntags: n\nsecrecy p: m\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn replays_with_expectations() {
        let c = parse_capability("processes: p q\ntags: n\n").unwrap();
        let script = parse_script(
            &c,
            "p add_cap +- n\nexpect p caps: n_p+ n_p-\np add_tag n_p\nexpect noedge p q\n\
             p set_message 1\np send_message_to q\nexpect q inbox:\nexpect p secrecy: n\n",
        )
        .unwrap();
        let r = replay(&c, &script);
        assert_eq!(r.expectations, 4);
        assert_eq!(r.failures.len(), 1, "{:?}", r.failures);
        assert!(r.failures[0].starts_with("line 8:"));
        assert!(!r.steps[3].changed);
    }
}
