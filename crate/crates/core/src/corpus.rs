//! Bundled example systems.

use crate::format::{parse_system_file, SystemFile};
use crate::model::Pes;

pub const FIGURE1: &str = include_str!("../corpus/figure1.nif");
pub const FIGURE2: &str = include_str!("../corpus/figure2.nif");
pub const FIGURE3: &str = include_str!("../corpus/figure3.nif");
pub const FIGURE4: &str = include_str!("../corpus/figure4.nif");
/// Two processes sharing one basic tag, with every action form enabled.
pub const CAPABILITY: &str = include_str!("../corpus/two_process.cap");
/// The tag-creation and capability-grant narrative as a replay script.
pub const CAPABILITY_SCRIPT: &str = include_str!("../corpus/grant.trace");

/// Every bundled `.nif` document with its file name.
pub const ALL: [(&str, &str); 4] = [
    ("figure1.nif", FIGURE1),
    ("figure2.nif", FIGURE2),
    ("figure3.nif", FIGURE3),
    ("figure4.nif", FIGURE4),
];

fn load(text: &str) -> SystemFile {
    parse_system_file(text).expect("bundled system parses")
}

/// Policy opened by P's action; secure only under the permissive reading.
pub fn figure1() -> Pes {
    load(FIGURE1).base
}

/// The `figure2` system; `dotted` selects the policy with the extra edge.
pub fn figure2(dotted: bool) -> Pes {
    let file = load(FIGURE2);
    if dotted {
        file.variant("dotted").expect("bundled variant")
    } else {
        file.base
    }
}

pub fn figure3() -> Pes {
    load(FIGURE3).base
}

/// The `figure4` system; `prime` adds the edge at s6.
pub fn figure4(prime: bool) -> Pes {
    let file = load(FIGURE4);
    if prime {
        file.variant("prime").expect("bundled variant")
    } else {
        file.base
    }
}

/// The corpus systems with every variant, labelled `file` or `file:variant`.
pub fn systems() -> Vec<(String, Pes)> {
    let mut out = Vec::new();
    for (name, text) in ALL {
        let file = load(text);
        let stem = name.trim_end_matches(".nif");
        out.push((stem.to_string(), file.base.clone()));
        for v in file.variant_names() {
            out.push((format!("{stem}:{v}"), file.variant(v).expect("bundled variant")));
        }
    }
    out
}

/// The bundled two-process capability configuration.
pub fn capability() -> crate::capability::CapabilityConfig {
    crate::capability::parse_capability(CAPABILITY).expect("bundled configuration parses")
}
