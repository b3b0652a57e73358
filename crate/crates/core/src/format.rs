//! The line-oriented `.nif` system format.
//!
//! ```text
//! # comment
//! domains: P A B
//! actions: p@P a@A
//! states: s0 s1 s2
//! initial: s0
//! trans: s0 p s1          # undeclared transitions are self-loops
//! obs: s2 B 1             # one row per state and domain ...
//! obs: * A 0              # ... or a default for every state
//! edge: s1 A B            # reflexive edges are implicit
//! variant open: edge s0 A B
//! variant open: noedge s1 A B
//! ```
//!
//! Declarations (`domains`, `actions`, `states`) must precede their uses.
//! Explicit `obs` rows take precedence over `*` rows irrespective of order.
//! A `variant` block names a second policy over the same machine, obtained
//! from the base edges by adding (`edge`) or removing (`noedge`) pairs.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{DomainId, Pes, PesBuilder, Signature, StateId};

/// One change a variant applies to the base policy.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EdgeChange {
    pub add: bool,
    pub state: StateId,
    pub from: DomainId,
    pub to: DomainId,
}

/// A parsed `.nif` document: the base system and its named policy variants.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemFile {
    pub base: Pes,
    pub variants: Vec<(String, Vec<EdgeChange>)>,
}

impl SystemFile {
    pub fn variant_names(&self) -> impl Iterator<Item = &str> {
        self.variants.iter().map(|(n, _)| n.as_str())
    }

    /// The base system with a variant's policy.
    pub fn variant(&self, name: &str) -> Result<Pes> {
        let (_, changes) = self
            .variants
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| Error::unknown("variant", name))?;
        let base = &self.base;
        let n = base.signature().domain_count();
        let mut rows: Vec<u64> = base
            .states()
            .flat_map(|s| base.edge_row(s).to_vec())
            .collect();
        for c in changes {
            let slot = &mut rows[c.state.index() * n + c.from.index()];
            if c.add {
                *slot |= 1 << c.to.0;
            } else if c.from != c.to {
                *slot &= !(1 << c.to.0);
            }
        }
        Ok(base.with_policy(|s, u| crate::model::DomainSet(rows[s.index() * n + u.index()])))
    }

    /// The base system, or the named variant when one is given.
    pub fn select(&self, variant: Option<&str>) -> Result<Pes> {
        match variant {
            None => Ok(self.base.clone()),
            Some(v) => self.variant(v),
        }
    }
}

/// Parses a `.nif` document and returns its base system.
pub fn parse_system(text: &str) -> Result<Pes> {
    parse_system_file(text).map(|f| f.base)
}

struct Line<'a> {
    number: usize,
    raw: &'a str,
}

impl<'a> Line<'a> {
    fn error(&self, token: &str, message: impl Into<String>) -> Error {
        // Tokens are subslices of the raw line, so the pointer offset is the column.
        let offset = (token.as_ptr() as usize).saturating_sub(self.raw.as_ptr() as usize);
        let column = if offset <= self.raw.len() {
            self.raw[..offset].chars().count() + 1
        } else {
            1
        };
        Error::parse(self.number, column, message)
    }
}

/// Parses a `.nif` document including its variants.
pub fn parse_system_file(text: &str) -> Result<SystemFile> {
    let mut domains: Option<Vec<String>> = None;
    let mut sig: Option<Signature> = None;
    let mut builder: Option<PesBuilder> = None;
    let mut default_obs: Vec<(DomainId, String)> = Vec::new();
    let mut variants: Vec<(String, Vec<EdgeChange>)> = Vec::new();
    let mut saw_initial = false;

    for (i, raw) in text.lines().enumerate() {
        let line = Line { number: i + 1, raw };
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(colon) = content.find(':') else {
            return Err(line.error(content.trim_start(), "expected `keyword: ...`"));
        };
        let head = content[..colon].trim();
        let body: Vec<&str> = content[colon + 1..].split_whitespace().collect();
        let head_words: Vec<&str> = content[..colon].split_whitespace().collect();
        let keyword = head_words.first().copied().unwrap_or(head);

        let need_sig = |have: bool, line: &Line, tok: &str| -> Result<()> {
            if have {
                Ok(())
            } else {
                Err(line.error(tok, "`domains` and `actions` must be declared first"))
            }
        };

        match keyword {
            "domains" => {
                if domains.is_some() {
                    return Err(line.error(keyword, "duplicate `domains` declaration"));
                }
                domains = Some(body.iter().map(|s| s.to_string()).collect());
            }
            "actions" => {
                let Some(ds) = &domains else {
                    return Err(line.error(keyword, "`domains` must be declared before `actions`"));
                };
                if sig.is_some() {
                    return Err(line.error(keyword, "duplicate `actions` declaration"));
                }
                let mut pairs = Vec::new();
                for tok in &body {
                    let Some((a, d)) = tok.split_once('@') else {
                        return Err(line.error(tok, "expected `action@domain`"));
                    };
                    if !ds.iter().any(|x| x == d) {
                        return Err(line.error(tok, format!("unknown domain `{d}`")));
                    }
                    pairs.push((a.to_string(), d.to_string()));
                }
                sig = Some(
                    Signature::new(ds.clone(), pairs)
                        .map_err(|e| line.error(keyword, e.to_string()))?,
                );
            }
            "states" => {
                need_sig(sig.is_some(), &line, keyword)?;
                if builder.is_some() {
                    return Err(line.error(keyword, "duplicate `states` declaration"));
                }
                builder = Some(
                    PesBuilder::new(sig.clone().unwrap(), body.iter().copied())
                        .map_err(|e| line.error(keyword, e.to_string()))?,
                );
            }
            "initial" | "trans" | "obs" | "edge" | "variant" => {
                need_sig(sig.is_some(), &line, keyword)?;
                let Some(b) = builder.as_mut() else {
                    return Err(line.error(keyword, "`states` must be declared first"));
                };
                let state = |b: &PesBuilder, tok: &str| {
                    b.state_id(tok)
                        .map_err(|_| line.error(tok, format!("unknown state `{tok}`")))
                };
                let domain = |b: &PesBuilder, tok: &str| {
                    b.signature()
                        .domain_id(tok)
                        .map_err(|_| line.error(tok, format!("unknown domain `{tok}`")))
                };
                let arity = |n: usize, what: &str| -> Result<()> {
                    if body.len() != n {
                        Err(line.error(keyword, format!("expected {what}")))
                    } else {
                        Ok(())
                    }
                };
                match keyword {
                    "initial" => {
                        arity(1, "`initial: STATE`")?;
                        let s = state(b, body[0])?;
                        b.initial(s);
                        saw_initial = true;
                    }
                    "trans" => {
                        arity(3, "`trans: STATE ACTION STATE`")?;
                        let s = state(b, body[0])?;
                        let a = b.signature().action_id(body[1]).map_err(|_| {
                            line.error(body[1], format!("unknown action `{}`", body[1]))
                        })?;
                        let t = state(b, body[2])?;
                        b.transition(s, a, t)
                            .map_err(|e| line.error(body[2], e.to_string()))?;
                    }
                    "obs" => {
                        arity(3, "`obs: STATE DOMAIN VALUE`")?;
                        let u = domain(b, body[1])?;
                        if body[0] == "*" {
                            default_obs.push((u, body[2].to_string()));
                        } else {
                            let s = state(b, body[0])?;
                            b.obs(s, u, body[2]);
                        }
                    }
                    "edge" => {
                        arity(3, "`edge: STATE DOMAIN DOMAIN`")?;
                        let s = state(b, body[0])?;
                        let (u, v) = (domain(b, body[1])?, domain(b, body[2])?);
                        b.edge(s, u, v);
                    }
                    _ => {
                        let [_, name] = head_words[..] else {
                            return Err(line.error(keyword, "expected `variant NAME: ...`"));
                        };
                        if body.len() != 4 || !(body[0] == "edge" || body[0] == "noedge") {
                            return Err(line.error(
                                keyword,
                                "expected `variant NAME: edge|noedge STATE DOMAIN DOMAIN`",
                            ));
                        }
                        let change = EdgeChange {
                            add: body[0] == "edge",
                            state: state(b, body[1])?,
                            from: domain(b, body[2])?,
                            to: domain(b, body[3])?,
                        };
                        match variants.iter_mut().find(|(n, _)| n == name) {
                            Some((_, cs)) => cs.push(change),
                            None => variants.push((name.to_string(), vec![change])),
                        }
                    }
                }
            }
            other => return Err(line.error(other, format!("unknown keyword `{other}`"))),
        }
    }

    let end = text.lines().count().max(1);
    let mut b = builder.ok_or_else(|| Error::parse(end, 1, "missing `states` declaration"))?;
    if !saw_initial {
        return Err(Error::parse(end, 1, "missing `initial` declaration"));
    }
    for (u, v) in &default_obs {
        b.default_obs(*u, v);
    }
    let base = b.build().map_err(|e| Error::parse(end, 1, e.to_string()))?;
    Ok(SystemFile { base, variants })
}

/// Prints a system in `.nif` syntax. Parsing the output yields an equal
/// system (truncation metadata of unfolds is not representable and is
/// dropped).
pub fn print_system(pes: &Pes) -> String {
    print_system_file(&SystemFile {
        base: pes.clone(),
        variants: Vec::new(),
    })
}

/// Prints a document with its variants.
pub fn print_system_file(file: &SystemFile) -> String {
    let pes = &file.base;
    let sig = pes.signature();
    let mut out = String::new();
    let _ = writeln!(out, "domains: {}", sig.domain_names().join(" "));
    let actions: Vec<String> = sig
        .actions()
        .map(|a| format!("{}@{}", sig.action_name(a), sig.domain_name(sig.dom(a))))
        .collect();
    let _ = writeln!(out, "actions: {}", actions.join(" "));
    let states: Vec<&str> = pes.states().map(|s| pes.state_name(s)).collect();
    let _ = writeln!(out, "states: {}", states.join(" "));
    let _ = writeln!(out, "initial: {}", pes.state_name(pes.initial()));
    let _ = writeln!(out);
    for s in pes.states() {
        for a in sig.actions() {
            let t = pes.step(s, a);
            if t != s {
                let _ = writeln!(
                    out,
                    "trans: {} {} {}",
                    pes.state_name(s),
                    sig.action_name(a),
                    pes.state_name(t)
                );
            }
        }
    }
    let _ = writeln!(out);
    for u in sig.domains() {
        // Use a `*` row for the most frequent value, then list exceptions.
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        for s in pes.states() {
            *counts.entry(pes.obs_value(s, u)).or_default() += 1;
        }
        let common = counts
            .iter()
            .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(x.0)))
            .map(|(v, _)| *v)
            .unwrap_or("0");
        let _ = writeln!(out, "obs: * {} {}", sig.domain_name(u), common);
        for s in pes.states() {
            let v = pes.obs_value(s, u);
            if v != common {
                let _ = writeln!(out, "obs: {} {} {}", pes.state_name(s), sig.domain_name(u), v);
            }
        }
    }
    let edges: Vec<String> = pes
        .states()
        .flat_map(|s| {
            pes.edges_at(s).into_iter().map(move |(u, v)| {
                format!(
                    "edge: {} {} {}",
                    pes.state_name(s),
                    sig.domain_name(u),
                    sig.domain_name(v)
                )
            })
        })
        .collect();
    if !edges.is_empty() {
        let _ = writeln!(out);
        for e in edges {
            let _ = writeln!(out, "{e}");
        }
    }
    for (name, changes) in &file.variants {
        let _ = writeln!(out);
        for c in changes {
            let _ = writeln!(
                out,
                "variant {}: {} {} {} {}",
                name,
                if c.add { "edge" } else { "noedge" },
                pes.state_name(c.state),
                sig.domain_name(c.from),
                sig.domain_name(c.to)
            );
        }
    }
    out
}
