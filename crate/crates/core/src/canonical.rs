//! Canonical JSON encoding used for checkpoints, reports and API bodies.
//!
//! Rules: object keys sorted lexicographically (byte order), no insignificant
//! whitespace, UTF-8, floats in shortest round-trip form. Non-finite floats
//! are not representable and must be modelled as `null` by the caller.

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};

pub fn to_value<T: Serialize>(value: &T) -> Result<Value> {
    Ok(sort_keys(serde_json::to_value(value)?))
}

pub fn to_string<T: Serialize>(value: &T) -> Result<String> {
    let v = to_value(value)?;
    Ok(serde_json::to_string(&v)?)
}

pub fn to_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    to_string(value).map(String::into_bytes)
}

/// Re-encode an arbitrary JSON document canonically.
pub fn canonicalize(doc: &str) -> Result<String> {
    let v: Value = serde_json::from_str(doc).map_err(|e| Error::Json(e.to_string()))?;
    Ok(serde_json::to_string(&sort_keys(v))?)
}

fn sort_keys(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                entries
                    .into_iter()
                    .map(|(k, v)| (k, sort_keys(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}
