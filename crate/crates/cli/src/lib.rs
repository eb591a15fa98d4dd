//! Batch driver for `membrane-opt`: config parsing, command dispatch and artifacts.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod config;
pub mod run;

pub use config::{parse_config, resolve_paths, Command, ConfigError, Expression, RunConfig};
pub use run::{run, sha256_hex, Outcome};

/// Single-line JSON record describing `err`.
pub fn error_record(err: &anyhow::Error) -> String {
    let (kind, line, key) = if let Some(c) = err.downcast_ref::<ConfigError>() {
        ("config", c.line, c.key.clone())
    } else if let Some(e) = err.chain().find_map(|e| e.downcast_ref::<membrane_core::Error>()) {
        (e.kind(), None, None)
    } else if err.chain().any(|e| e.is::<std::io::Error>()) {
        ("io", None, None)
    } else {
        ("run", None, None)
    };
    let message = err.chain().map(|e| e.to_string()).collect::<Vec<_>>().join(": ");
    serde_json::json!({ "error": kind, "line": line, "key": key, "message": message }).to_string()
}
