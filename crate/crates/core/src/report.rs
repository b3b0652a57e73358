//! Property dispatch and machine-readable reports.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::access::{ac_complete_construct, check_drm, derive_security_from_drm, Condition, DrmReport};
use crate::capability::{explore, interpret, parse_capability};
use crate::checkers::{
    check_globally_known, check_i_security, check_locality, check_lpurge_security,
    check_ta_may_security, check_ta_must_security, check_ta_static_security,
    check_unwinding_security, state_unwinding_check, static_verdict, LocalityMode, UnwindingMode,
};
use crate::error::{Error, Result};
use crate::format::parse_system_file;
use crate::model::Pes;
use crate::unwinding::check_theorem_mustunwind;
use crate::verdict::{Outcome, Verdict, Witness};

/// A checkable property.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Property {
    Ta,
    Mayta,
    Mustta,
    Unwinding,
    Locality,
    LocalitySender,
    LocalityReceiver,
    Static,
    Gk,
    Lpurge,
    Isec,
    Drm,
    TheoremMustunwind,
    StateBox,
    StateDiamond,
}

impl Property {
    pub const ALL: [Property; 15] = [
        Property::Ta,
        Property::Mayta,
        Property::Mustta,
        Property::Unwinding,
        Property::Locality,
        Property::LocalitySender,
        Property::LocalityReceiver,
        Property::Static,
        Property::Gk,
        Property::Lpurge,
        Property::Isec,
        Property::Drm,
        Property::TheoremMustunwind,
        Property::StateBox,
        Property::StateDiamond,
    ];

    /// What a run checks when no property is named.
    pub const DEFAULT: [Property; 8] = [
        Property::Mayta,
        Property::Mustta,
        Property::Unwinding,
        Property::Locality,
        Property::Static,
        Property::Lpurge,
        Property::Isec,
        Property::StateBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::Ta => "ta",
            Property::Mayta => "mayta",
            Property::Mustta => "mustta",
            Property::Unwinding => "unwinding",
            Property::Locality => "locality",
            Property::LocalitySender => "locality-sender",
            Property::LocalityReceiver => "locality-receiver",
            Property::Static => "static",
            Property::Gk => "gk",
            Property::Lpurge => "lpurge",
            Property::Isec => "isec",
            Property::Drm => "drm",
            Property::TheoremMustunwind => "theorem-mustunwind",
            Property::StateBox => "state-box",
            Property::StateDiamond => "state-diamond",
        }
    }

    /// Parses a comma-separated list.
    pub fn parse_list(text: &str) -> Result<Vec<Property>> {
        text.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Property {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Property::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::unknown("property", s))
    }
}

/// Run parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CheckOptions {
    pub depth: usize,
    /// Boundary margin of the `theorem-mustunwind` cross-check.
    pub margin: usize,
    /// Policy domain for `gk`.
    pub policy_domain: Option<String>,
    /// Strip edges leaving domains without actions before checking.
    pub normalize: bool,
    /// Record wall-clock time per property.
    pub timing: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            depth: 6,
            margin: 1,
            policy_domain: None,
            normalize: true,
            timing: true,
        }
    }
}

/// Wall-clock time of one property check.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Timing {
    pub property: String,
    pub millis: f64,
}

/// The result of one run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    /// SHA-256 of the input text, hex encoded.
    pub input_digest: String,
    pub system: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub depth: usize,
    pub verdicts: Vec<Verdict>,
    pub timings: Vec<Timing>,
    pub notes: Vec<String>,
}

impl Report {
    fn new(text: &str, system: &str, variant: Option<&str>, depth: usize) -> Self {
        Report {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            input_digest: format!("{:x}", Sha256::digest(text.as_bytes())),
            system: system.to_string(),
            variant: variant.map(str::to_string),
            depth,
            verdicts: Vec::new(),
            timings: Vec::new(),
            notes: Vec::new(),
        }
    }

    /// Process exit code: 0 when every verdict is a success, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.verdicts.iter().all(|v| v.outcome.is_ok()) {
            0
        } else {
            1
        }
    }

    /// One line per verdict, for humans.
    pub fn summary(&self) -> String {
        let mut out = format!(
            "{}{} (depth {})\n",
            self.system,
            self.variant.as_deref().map(|v| format!(":{v}")).unwrap_or_default(),
            self.depth
        );
        for v in &self.verdicts {
            let outcome = serde_json::to_value(v.outcome).expect("serializable");
            out.push_str(&format!("  {:<20} {}", v.property, outcome.as_str().unwrap_or("?")));
            if let Some(w) = &v.witness {
                out.push_str(&format!("  {}", render_witness(w)));
            }
            out.push('\n');
            for n in &v.notes {
                out.push_str(&format!("      note: {n}\n"));
            }
        }
        for n in &self.notes {
            out.push_str(&format!("  note: {n}\n"));
        }
        out
    }
}

fn show(trace: &[String]) -> String {
    if trace.is_empty() {
        "ε".into()
    } else {
        trace.join(".")
    }
}

/// Compact rendering of a witness.
pub fn render_witness(w: &Witness) -> String {
    match w {
        Witness::TracePair { first, second, domain } => {
            format!("({}, {}, {domain})", show(first), show(second))
        }
        Witness::Purge { trace, domain, purged } => {
            format!("({}, {domain}) purged to {}", show(trace), show(purged))
        }
        Witness::Locality { first, second, from, to } | Witness::EdgePair { first, second, from, to } => {
            format!("({}, {}, {from}, {to})", show(first), show(second))
        }
        Witness::StatePurge { state, first, second, domain } => {
            format!("({state}, {}, {}, {domain})", show(first), show(second))
        }
        Witness::StatePair { first, second, domain } => format!("({first}, {second}, {domain})"),
        Witness::Edge { trace, from, to } => format!("({}, {from}, {to})", show(trace)),
        Witness::Reference { condition, states, action, object, domains } => {
            let mut parts = vec![condition.clone(), states.join(" ")];
            parts.extend(action.clone());
            parts.extend(object.clone());
            parts.push(domains.join(" "));
            format!("({})", parts.join(", "))
        }
    }
}

#[cfg(not(target_arch = "wasm32"))]
fn clock(enabled: bool) -> impl FnOnce() -> Option<f64> {
    let start = enabled.then(std::time::Instant::now);
    move || start.map(|s| s.elapsed().as_secs_f64() * 1000.0)
}

#[cfg(target_arch = "wasm32")]
fn clock(_enabled: bool) -> impl FnOnce() -> Option<f64> {
    || None
}

/// Verdicts for a DRM report: DRM-1..6 and DRM-5′ separately.
pub fn drm_verdicts(report: &DrmReport) -> Vec<Verdict> {
    let witness = |c: &crate::access::ConditionResult| {
        c.witness.as_ref().map(|w| Witness::Reference {
            condition: c.condition.name().to_string(),
            states: w.states.clone(),
            action: w.action.clone(),
            object: w.object.clone(),
            domains: w.domains.clone(),
        })
    };
    let basic = report
        .conditions
        .iter()
        .filter(|c| c.condition != Condition::Drm5Strong);
    let mut drm = Verdict::new(
        "drm",
        if report.basic_holds() { Outcome::Holds } else { Outcome::Fails },
        Some(report.depth),
    );
    drm.witness = basic.clone().find(|c| c.outcome == Outcome::Fails).and_then(witness);
    for c in basic {
        let o = serde_json::to_value(c.outcome).expect("serializable");
        drm.notes.push(format!("{}: {} over {}", c.condition.name(), o.as_str().unwrap_or("?"), c.scope));
    }
    let mut out = vec![drm];
    if let Some(c) = report.get(Condition::Drm5Strong) {
        let mut v = Verdict::new("drm-strong", c.outcome, Some(report.depth));
        v.witness = witness(c);
        v.notes.push(format!("DRM-5' over {}", c.scope));
        out.push(v);
    }
    out
}

/// Checks properties of one system. Returns the verdicts, timings and
/// run notes.
pub fn check_system(
    pes: &Pes,
    properties: &[Property],
    opts: &CheckOptions,
) -> Result<(Vec<Verdict>, Vec<Timing>, Vec<String>)> {
    let mut notes = Vec::new();
    let normalized;
    let pes = if opts.normalize {
        let (stripped, removed) = pes.without_inactive_edges();
        if !removed.is_empty() {
            let names: Vec<&str> = removed.iter().map(|u| pes.signature().domain_name(*u)).collect();
            notes.push(format!(
                "removed edges leaving domains without actions: {}",
                names.join(", ")
            ));
        }
        normalized = stripped;
        &normalized
    } else {
        pes
    };
    let k = opts.depth;
    let mut verdicts = Vec::new();
    let mut timings = Vec::new();
    for p in properties {
        let stop = clock(opts.timing);
        let mut vs = match p {
            Property::Ta => vec![check_ta_static_security(pes, k)?],
            Property::Mayta => vec![check_ta_may_security(pes, k)?],
            Property::Mustta => vec![check_ta_must_security(pes, k)?],
            Property::Unwinding => vec![check_unwinding_security(pes, k)?],
            Property::Locality => vec![check_locality(pes, k, LocalityMode::Joint)?],
            Property::LocalitySender => vec![check_locality(pes, k, LocalityMode::Sender)?],
            Property::LocalityReceiver => vec![check_locality(pes, k, LocalityMode::Receiver)?],
            Property::Static => vec![static_verdict(pes)],
            Property::Gk => {
                let name = opts.policy_domain.as_deref().ok_or_else(|| {
                    Error::InvalidSystem("the gk property needs a policy domain".into())
                })?;
                vec![check_globally_known(pes, pes.signature().domain_id(name)?, k)?]
            }
            Property::Lpurge => vec![check_lpurge_security(pes, k)?],
            Property::Isec => vec![check_i_security(pes, k)?],
            Property::Drm => {
                let sys = ac_complete_construct(pes, k)?;
                let report = check_drm(&sys, k, true)?;
                let mut vs = drm_verdicts(&report);
                for n in &sys.notes {
                    vs[0].notes.push(n.clone());
                }
                for d in derive_security_from_drm(&report, &sys) {
                    let o = serde_json::to_value(d.outcome).expect("serializable");
                    vs[0].notes.push(format!("derived {}: {}", d.property, o.as_str().unwrap_or("?")));
                }
                vs
            }
            Property::TheoremMustunwind => {
                let r = check_theorem_mustunwind(pes, k, opts.margin)?;
                let mut v = Verdict::new(
                    "theorem-mustunwind",
                    if r.agrees() { Outcome::Holds } else { Outcome::Fails },
                    Some(k),
                );
                v.notes.push(format!(
                    "{} traces up to length {} compared: {} interior and {} boundary mismatches",
                    r.interior_traces,
                    k - r.margin,
                    r.interior_mismatches,
                    r.boundary_mismatches
                ));
                v.witness = r.examples.iter().find(|m| !m.boundary).map(|m| Witness::TracePair {
                    first: m.first.clone(),
                    second: m.second.clone(),
                    domain: m.domain.clone(),
                });
                vec![v]
            }
            Property::StateBox => vec![state_unwinding_check(pes, UnwindingMode::Box).verdict],
            Property::StateDiamond => vec![state_unwinding_check(pes, UnwindingMode::Diamond).verdict],
        };
        if let Some(ms) = stop() {
            timings.push(Timing {
                property: p.name().to_string(),
                millis: ms,
            });
        }
        verdicts.append(&mut vs);
    }
    Ok((verdicts, timings, notes))
}

/// Parses a `.nif` document, selects a variant and checks the properties.
pub fn run_checks(
    text: &str,
    system: &str,
    variant: Option<&str>,
    properties: &[Property],
    opts: &CheckOptions,
) -> Result<Report> {
    let pes = parse_system_file(text)?.select(variant)?;
    let mut report = Report::new(text, system, variant, opts.depth);
    let (verdicts, timings, notes) = check_system(&pes, properties, opts)?;
    report.verdicts = verdicts;
    report.timings = timings;
    report.notes = notes;
    Ok(report)
}

/// Checks every bundled system and each of its variants.
pub fn run_corpus(properties: &[Property], opts: &CheckOptions) -> Result<Vec<Report>> {
    let mut out = Vec::new();
    for (name, text) in crate::corpus::ALL {
        let file = parse_system_file(text)?;
        let variants: Vec<Option<&str>> = std::iter::once(None).chain(file.variant_names().map(Some)).collect();
        for v in variants {
            out.push(run_checks(text, name, v, properties, opts)?);
        }
    }
    Ok(out)
}

/// Explores a `.cap` configuration to `opts.depth` and checks the
/// properties on the resulting system; `drm` uses the capability
/// system's own access-control interpretation.
pub fn run_capability_checks(
    text: &str,
    system: &str,
    properties: &[Property],
    opts: &CheckOptions,
) -> Result<Report> {
    let config = parse_capability(text)?;
    let k = opts.depth;
    let sys = explore(&config, k)?;
    let mut report = Report::new(text, system, None, k);
    report.notes.push(format!(
        "{} states explored, {} actions{}",
        sys.states.len(),
        sys.pes.signature().action_count(),
        if sys.complete {
            ", exploration complete".to_string()
        } else {
            format!(", states beyond depth {k} are frontier states")
        }
    ));
    let rest: Vec<Property> = properties.iter().copied().filter(|p| *p != Property::Drm).collect();
    if properties.contains(&Property::Drm) {
        let stop = clock(opts.timing);
        let st = interpret(&config, &sys)?;
        let r = check_drm(&st, k, true)?;
        report.verdicts.extend(drm_verdicts(&r));
        report.verdicts.extend(derive_security_from_drm(&r, &st));
        if let Some(ms) = stop() {
            report.timings.push(Timing {
                property: "drm".into(),
                millis: ms,
            });
        }
    }
    let plain = CheckOptions {
        normalize: false,
        ..opts.clone()
    };
    let (verdicts, timings, notes) = check_system(&sys.pes, &rest, &plain)?;
    report.verdicts.extend(verdicts);
    report.timings.extend(timings);
    report.notes.extend(notes);
    Ok(report)
}
