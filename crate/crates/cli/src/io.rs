//! Input files, diagnostics and exit codes.

use std::fmt;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

/// A failed command: exit code 1 for bad input, 2 for mathematical infeasibility.
#[derive(Debug)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<qpcalc_core::Error> for CliError {
    fn from(e: qpcalc_core::Error) -> Self {
        CliError {
            code: if e.is_infeasible() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Reads and deserializes a JSON file, reporting the failing field path and position.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    parse_json(&text).map_err(|msg| CliError::input(format!("{}: {msg}", path.display())))
}

pub fn parse_json<T: DeserializeOwned>(text: &str) -> std::result::Result<T, String> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let field = e.path().to_string();
        let inner = e.into_inner();
        if field == "." {
            format!("schema error: {inner}")
        } else {
            format!("schema error in field `{field}`: {inner}")
        }
    })
}
