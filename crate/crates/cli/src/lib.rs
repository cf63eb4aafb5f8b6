//! Library half of the `fwdreg` command-line tool.
//!
//! Every command is a plain function returning a serializable report, so the
//! binary only parses flags, picks a thread pool and writes output.

pub mod commands;
pub mod error;
pub mod experiments;
pub mod stats;
pub mod table;

use std::io::Write;
use std::path::Path;

use fwdreg_core::SimConfig;
use serde::Serialize;

pub use error::{CliError, CliResult};

/// Pretty JSON with a trailing newline, to `path` or stdout.
pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

pub fn load_sim_config(path: &Path) -> CliResult<SimConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let cfg: SimConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    cfg.validate()?;
    Ok(cfg)
}
