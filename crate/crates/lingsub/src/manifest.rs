use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

/// Provenance record written next to, and embedded in, every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub inputs: Vec<String>,
    pub seeds: BTreeMap<String, u64>,
    pub config: Value,
    /// SHA-256 of the compact JSON encoding of `config`.
    pub config_hash: String,
    pub tool_version: String,
    /// Seconds since the epoch, taken from `SOURCE_DATE_EPOCH` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl RunManifest {
    pub fn new(subcommand: &str, inputs: &[&Path], seeds: &[(&str, u64)], config: Value) -> Self {
        let encoded = serde_json::to_string(&config).expect("JSON values always encode");
        let digest = Sha256::digest(encoded.as_bytes());
        Self {
            subcommand: subcommand.into(),
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            seeds: seeds.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            config,
            config_hash: digest.iter().map(|b| format!("{b:02x}")).collect(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()),
        }
    }
}
