//! Run manifests embedded in every report.

use std::path::Path;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const TOOL: &str = "semcurv";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct InputDigest {
    pub role: String,
    /// File name without directories, so reports do not depend on where the
    /// inputs live.
    pub file: String,
    pub sha256: String,
}

impl InputDigest {
    pub fn new(role: &str, path: &Path, bytes: &[u8]) -> Self {
        Self {
            role: role.to_owned(),
            file: path
                .file_name()
                .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned()),
            sha256: sha256_hex(bytes),
        }
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest<C> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: C,
    pub inputs: Vec<InputDigest>,
}

impl<C> RunManifest<C> {
    pub fn new(command: &'static str, config: C, inputs: Vec<InputDigest>) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            command,
            config,
            inputs,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checks that a parsed report carries a well-formed manifest.
pub fn check_manifest(report: &Value) -> Result<(), String> {
    let m = report
        .get("manifest")
        .and_then(Value::as_object)
        .ok_or("report has no manifest object")?;
    if m.get("tool").and_then(Value::as_str) != Some(TOOL) {
        return Err("manifest.tool is missing or not \"semcurv\"".into());
    }
    for key in ["version", "command"] {
        if !m.get(key).is_some_and(Value::is_string) {
            return Err(format!("manifest.{key} is missing"));
        }
    }
    if !m.get("config").is_some_and(Value::is_object) {
        return Err("manifest.config is missing".into());
    }
    let inputs = m
        .get("inputs")
        .and_then(Value::as_array)
        .ok_or("manifest.inputs is missing")?;
    for (i, input) in inputs.iter().enumerate() {
        let digest = input.get("sha256").and_then(Value::as_str).unwrap_or("");
        if digest.len() != 64 || !digest.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(format!("manifest.inputs[{i}].sha256 is not a SHA-256 digest"));
        }
    }
    Ok(())
}
