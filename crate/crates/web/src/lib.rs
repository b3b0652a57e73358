//! Browser bindings: three operations over text inputs, each returning a
//! JSON document or throwing an error message.

use dynflow::capability::{parse_capability, parse_script, replay};
use dynflow::format::parse_system_file;
use dynflow::report::{run_checks, CheckOptions, Property};
use dynflow::unwinding::unwinding_partition;
use dynflow::TraceSpace;
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest bound the page accepts; keeps the tab responsive.
pub const MAX_DEPTH: usize = 8;
/// Largest bound for listing unwinding classes.
pub const MAX_PARTITION_DEPTH: usize = 4;

fn check_depth(depth: usize, max: usize) -> Result<(), String> {
    if depth > max {
        Err(format!("depth {depth} exceeds the demo limit {max}"))
    } else {
        Ok(())
    }
}

fn variant(name: &str) -> Option<&str> {
    Some(name.trim()).filter(|v| !v.is_empty())
}

/// Runs the listed properties (comma separated; empty for the default set)
/// and returns the JSON report.
pub fn analyze_json(text: &str, variant_name: &str, properties: &str, depth: usize) -> Result<String, String> {
    check_depth(depth, MAX_DEPTH)?;
    let props = if properties.trim().is_empty() {
        Property::DEFAULT.to_vec()
    } else {
        Property::parse_list(properties).map_err(|e| e.to_string())?
    };
    let opts = CheckOptions {
        depth,
        timing: false,
        ..Default::default()
    };
    let report = run_checks(text, "input", variant(variant_name), &props, &opts).map_err(|e| e.to_string())?;
    serde_json::to_string(&report).map_err(|e| e.to_string())
}

/// The bounded unwinding classes of every domain, each class listed as
/// trace names in shortlex order.
pub fn partitions_json(text: &str, variant_name: &str, depth: usize) -> Result<String, String> {
    check_depth(depth, MAX_PARTITION_DEPTH)?;
    let pes = parse_system_file(text)
        .and_then(|f| f.select(variant(variant_name)))
        .map_err(|e| e.to_string())?;
    let space = TraceSpace::new(&pes, depth).map_err(|e| e.to_string())?;
    let result = unwinding_partition(&pes, &space);
    let sig = pes.signature();
    let domains: Vec<_> = sig
        .domains()
        .map(|u| {
            let classes: Vec<Vec<String>> = result
                .partition(u)
                .classes(space.len())
                .into_iter()
                .map(|c| c.into_iter().map(|id| sig.format_trace(&space.trace(id))).collect())
                .collect();
            json!({ "domain": sig.domain_name(u), "classes": classes })
        })
        .collect();
    Ok(json!({
        "depth": depth,
        "traces": space.len(),
        "saturated": result.saturated,
        "stats": result.stats,
        "domains": domains,
    })
    .to_string())
}

/// Replays a script against a capability configuration.
pub fn capability_replay_json(config: &str, script: &str) -> Result<String, String> {
    let c = parse_capability(config).map_err(|e| format!("configuration: {e}"))?;
    let items = parse_script(&c, script).map_err(|e| format!("script: {e}"))?;
    serde_json::to_string(&replay(&c, &items)).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn analyze(text: &str, variant: &str, properties: &str, depth: usize) -> Result<String, JsError> {
    analyze_json(text, variant, properties, depth).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn partitions(text: &str, variant: &str, depth: usize) -> Result<String, JsError> {
    partitions_json(text, variant, depth).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn capability_replay(config: &str, script: &str) -> Result<String, JsError> {
    capability_replay_json(config, script).map_err(|e| JsError::new(&e))
}

/// The bundled examples, as a JSON object from file name to text.
#[wasm_bindgen]
pub fn examples() -> String {
    let mut map = serde_json::Map::new();
    for (name, text) in dynflow::corpus::ALL {
        map.insert(name.into(), text.into());
    }
    map.insert("two_process.cap".into(), dynflow::corpus::CAPABILITY.into());
    map.insert("grant.trace".into(), dynflow::corpus::CAPABILITY_SCRIPT.into());
    serde_json::Value::Object(map).to_string()
}
