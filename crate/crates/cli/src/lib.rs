//! Command-line surface for the submersible search planner.
//!
//! The binary is a thin wrapper over this library: [`config`] parses flat
//! `key = value` scenario files, [`scenario`] turns a config into core
//! types, [`commands`] holds one function per subcommand, and [`error`]
//! maps failures onto process exit codes (2 config, 3 numeric, 4 I/O).
//! Keeping the logic in a library lets the integration tests drive the
//! exact code paths the binary runs.

pub mod commands;
pub mod config;
pub mod error;
pub mod scenario;

use std::path::PathBuf;

/// Resolves the output directory: explicit flag, then the
/// `SUBSEARCH_OUT_DIR` environment variable, then the working directory.
pub fn resolve_out_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("SUBSEARCH_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn out_dir_flag_wins() {
        assert_eq!(resolve_out_dir(Some("x".into())), PathBuf::from("x"));
    }
}
