//! The JSON report envelope every subcommand emits.
//!
//! Reports are regression artifacts: everything outside the `meta` block
//! is bit-reproducible for a fixed config, input, and seed, regardless of
//! thread count. Wall-clock data (timestamp, elapsed time, bench timings)
//! lives only under `meta` so reports can be diffed with that one key
//! stripped. Keys are emitted in sorted order and non-finite numbers
//! serialize as `null`.

use serde::Serialize;
use serde_json::Value;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Serialize)]
pub struct Meta {
    pub timestamp_unix: u64,
    pub elapsed_ms: u64,
    pub threads: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings: Option<Value>,
}

#[derive(Serialize)]
pub struct Report {
    pub command: String,
    pub version: String,
    pub config: Value,
    pub results: Value,
    pub meta: Meta,
}

impl Report {
    pub fn new(
        command: &str,
        config: Value,
        results: Value,
        elapsed_ms: u64,
        threads: usize,
        timings: Option<Value>,
    ) -> Self {
        let timestamp_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Report {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config,
            results,
            meta: Meta {
                timestamp_unix,
                elapsed_ms,
                threads,
                timings,
            },
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}
