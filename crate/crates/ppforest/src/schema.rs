//! The published JSON schema for service responses and exports.

use serde_json::Value;

/// Draft 2020-12 schema; each payload type is a `$defs` entry.
pub const SCHEMA: &str = include_str!("../schemas/ppforest.schema.json");

/// Names of the payload types in [`SCHEMA`].
pub fn definitions() -> Vec<String> {
    let root: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    root["$defs"].as_object().map(|m| m.keys().cloned().collect()).unwrap_or_default()
}

/// A standalone schema for one payload type, or `None` if it is not defined.
pub fn schema_for(definition: &str) -> Option<Value> {
    let mut root: Value = serde_json::from_str(SCHEMA).expect("bundled schema is valid JSON");
    root["$defs"].get(definition)?;
    root["$ref"] = Value::String(format!("#/$defs/{definition}"));
    Some(root)
}
