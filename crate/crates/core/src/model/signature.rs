//! Signatures: the domains, the actions, and the map assigning each action
//! to the domain that performs it.

use std::collections::HashMap;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Index of a security domain within its [`Signature`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct DomainId(pub u16);

/// Index of an action within its [`Signature`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct ActionId(pub u16);

impl DomainId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ActionId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A finite sequence of actions. The empty trace is the empty vector.
pub type Trace = Vec<ActionId>;

/// Domain sets are bitmasks; this bounds the number of domains a signature
/// may declare.
pub const MAX_DOMAINS: usize = 64;

/// A set of domains of one signature, stored as a bitmask.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DomainSet(pub u64);

impl DomainSet {
    pub const EMPTY: DomainSet = DomainSet(0);

    pub fn singleton(d: DomainId) -> Self {
        DomainSet(1 << d.0)
    }

    pub fn contains(self, d: DomainId) -> bool {
        self.0 >> d.0 & 1 == 1
    }

    pub fn insert(&mut self, d: DomainId) {
        self.0 |= 1 << d.0;
    }

    pub fn union(self, other: DomainSet) -> DomainSet {
        DomainSet(self.0 | other.0)
    }

    pub fn intersects(self, other: DomainSet) -> bool {
        self.0 & other.0 != 0
    }

    pub fn is_subset(self, other: DomainSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in increasing index order.
    pub fn iter(self) -> impl Iterator<Item = DomainId> {
        (0..64u16).filter(move |i| self.0 >> i & 1 == 1).map(DomainId)
    }
}

impl FromIterator<DomainId> for DomainSet {
    fn from_iter<I: IntoIterator<Item = DomainId>>(iter: I) -> Self {
        let mut set = DomainSet::EMPTY;
        for d in iter {
            set.insert(d);
        }
        set
    }
}

/// The tuple of domains, actions and the domain function `dom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    domains: Vec<String>,
    actions: Vec<String>,
    dom: Vec<DomainId>,
    domain_index: HashMap<String, DomainId>,
    action_index: HashMap<String, ActionId>,
}

impl Signature {
    /// Builds a signature from domain names and `(action, domain)` pairs.
    /// Declaration order is significant: it fixes the trace order used for
    /// enumeration and witness selection.
    pub fn new<D, A, B>(domains: D, actions: A) -> Result<Self>
    where
        D: IntoIterator,
        D::Item: Into<String>,
        A: IntoIterator<Item = (B, B)>,
        B: Into<String>,
    {
        let domains: Vec<String> = domains.into_iter().map(Into::into).collect();
        if domains.len() > MAX_DOMAINS {
            return Err(Error::InvalidSystem(format!(
                "{} domains declared, at most {MAX_DOMAINS} are supported",
                domains.len()
            )));
        }
        let mut domain_index = HashMap::new();
        for (i, name) in domains.iter().enumerate() {
            if domain_index.insert(name.clone(), DomainId(i as u16)).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate domain `{name}`")));
            }
        }
        let mut names = Vec::new();
        let mut dom = Vec::new();
        let mut action_index = HashMap::new();
        for (action, domain) in actions {
            let (action, domain) = (action.into(), domain.into());
            let d = *domain_index
                .get(&domain)
                .ok_or_else(|| Error::unknown("domain", domain.clone()))?;
            if names.len() >= u16::MAX as usize {
                return Err(Error::InvalidSystem("too many actions".into()));
            }
            let id = ActionId(names.len() as u16);
            if action_index.insert(action.clone(), id).is_some() {
                return Err(Error::InvalidSystem(format!("duplicate action `{action}`")));
            }
            names.push(action);
            dom.push(d);
        }
        Ok(Signature {
            domains,
            actions: names,
            dom,
            domain_index,
            action_index,
        })
    }

    pub fn domain_count(&self) -> usize {
        self.domains.len()
    }

    pub fn action_count(&self) -> usize {
        self.actions.len()
    }

    pub fn domains(&self) -> impl Iterator<Item = DomainId> + '_ {
        (0..self.domains.len() as u16).map(DomainId)
    }

    pub fn actions(&self) -> impl Iterator<Item = ActionId> + '_ {
        (0..self.actions.len() as u16).map(ActionId)
    }

    pub fn domain_name(&self, d: DomainId) -> &str {
        &self.domains[d.index()]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.actions[a.index()]
    }

    pub fn domain_names(&self) -> &[String] {
        &self.domains
    }

    pub fn action_names(&self) -> &[String] {
        &self.actions
    }

    pub fn domain_id(&self, name: &str) -> Result<DomainId> {
        self.domain_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::unknown("domain", name))
    }

    pub fn action_id(&self, name: &str) -> Result<ActionId> {
        self.action_index
            .get(name)
            .copied()
            .ok_or_else(|| Error::unknown("action", name))
    }

    /// The domain performing an action.
    pub fn dom(&self, a: ActionId) -> DomainId {
        self.dom[a.index()]
    }

    /// The set of all domains.
    pub fn all_domains(&self) -> DomainSet {
        self.domains().collect()
    }

    /// Domains that perform at least one action.
    pub fn active_domains(&self) -> DomainSet {
        self.dom.iter().copied().collect()
    }

    /// Parses a trace written as action names separated by whitespace or
    /// `.`; `ε`, `e` (when no action is called `e`) and the empty string
    /// denote the empty trace. When every action name is one character
    /// long, names may also be run together (`pa` for `p.a`).
    pub fn parse_trace(&self, text: &str) -> Result<Trace> {
        let text = text.trim();
        if text.is_empty() || text == "ε" || (text == "e" && !self.action_index.contains_key("e"))
        {
            return Ok(Vec::new());
        }
        if text.contains(|c: char| c.is_whitespace() || c == '.') {
            return text
                .split(|c: char| c.is_whitespace() || c == '.')
                .filter(|s| !s.is_empty())
                .map(|s| self.action_id(s))
                .collect();
        }
        if let Ok(a) = self.action_id(text) {
            return Ok(vec![a]);
        }
        if self.actions.iter().all(|name| name.chars().count() == 1) {
            return text
                .chars()
                .map(|c| self.action_id(c.encode_utf8(&mut [0; 4])))
                .collect();
        }
        Err(Error::unknown("action", text))
    }

    /// Renders a trace as `ε` or dot-separated action names.
    pub fn format_trace(&self, trace: &[ActionId]) -> String {
        if trace.is_empty() {
            return "ε".to_string();
        }
        let names: Vec<&str> = trace.iter().map(|a| self.action_name(*a)).collect();
        names.join(".")
    }

    /// Action names of a trace, for serialized witnesses.
    pub fn trace_names(&self, trace: &[ActionId]) -> Vec<String> {
        trace.iter().map(|a| self.action_name(*a).to_string()).collect()
    }

    /// Inverse of [`Signature::trace_names`].
    pub fn trace_from_names<S: AsRef<str>>(&self, names: &[S]) -> Result<Trace> {
        names.iter().map(|n| self.action_id(n.as_ref())).collect()
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "domains {{{}}}, actions {{", self.domains.join(", "))?;
        for (i, a) in self.actions.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}@{}", self.domains[self.dom[i].index()])?;
        }
        write!(f, "}}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fig1() -> Signature {
        Signature::new(["P", "A", "B"], [("p", "P"), ("a", "A")]).unwrap()
    }

    #[test]
    fn dom_is_total_and_ordered() {
        let sig = fig1();
        assert_eq!(sig.dom(sig.action_id("p").unwrap()), sig.domain_id("P").unwrap());
        assert_eq!(sig.dom(sig.action_id("a").unwrap()), sig.domain_id("A").unwrap());
        let active: Vec<_> = sig.active_domains().iter().collect();
        assert_eq!(active, vec![DomainId(0), DomainId(1)]);
    }

    #[test]
    fn rejects_duplicates_and_unknown_domains() {
        assert!(Signature::new(["A", "A"], Vec::<(&str, &str)>::new()).is_err());
        assert!(Signature::new(["A"], [("a", "A"), ("a", "A")]).is_err());
        assert!(matches!(
            Signature::new(["A"], [("a", "B")]),
            Err(Error::UnknownIdentifier { kind: "domain", .. })
        ));
    }

    #[test]
    fn trace_syntax() {
        let sig = fig1();
        let p = sig.action_id("p").unwrap();
        let a = sig.action_id("a").unwrap();
        assert_eq!(sig.parse_trace("pa").unwrap(), vec![p, a]);
        assert_eq!(sig.parse_trace("p a").unwrap(), vec![p, a]);
        assert_eq!(sig.parse_trace("p.a").unwrap(), vec![p, a]);
        assert_eq!(sig.parse_trace("ε").unwrap(), vec![]);
        assert_eq!(sig.format_trace(&[p, a]), "p.a");
        assert!(sig.parse_trace("px").is_err());
    }

    #[test]
    fn domain_set_operations() {
        let mut s = DomainSet::EMPTY;
        s.insert(DomainId(3));
        s.insert(DomainId(0));
        assert_eq!(s.iter().collect::<Vec<_>>(), vec![DomainId(0), DomainId(3)]);
        assert!(DomainSet::singleton(DomainId(3)).is_subset(s));
        assert_eq!(s.len(), 2);
    }
}
