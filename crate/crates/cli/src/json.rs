//! Canonical report JSON: struct field order, every float written with 17
//! significant digits, non-finite floats as `null`, two-space indentation and
//! a trailing newline.

use serde::Serialize;
use serde_json::{Number, Value};

/// `x` with 17 significant digits, e.g. `1.2500000000000000e-1`.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

fn canonical_number(n: &Number) -> Value {
    if n.is_u64() || n.is_i64() {
        return Value::Number(n.clone());
    }
    match n.as_f64() {
        Some(x) if x.is_finite() => Value::Number(sig17(x).parse().expect("sig17 output is valid JSON")),
        _ => Value::Null,
    }
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) => canonical_number(&n),
        Value::Array(a) => Value::Array(a.into_iter().map(canonicalize).collect()),
        Value::Object(m) => Value::Object(m.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

/// Renders a report in canonical form.
pub fn to_canonical_string<T: Serialize>(report: &T) -> serde_json::Result<String> {
    let value = canonicalize(serde_json::to_value(report)?);
    let mut s = serde_json::to_string_pretty(&value)?;
    s.push('\n');
    Ok(s)
}
