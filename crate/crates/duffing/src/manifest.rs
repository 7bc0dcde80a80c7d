use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::export::{write_json, Params};
use crate::AppError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Failed,
}

/// Record of one command invocation. The only file carrying wall-clock data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub config_hash: Option<String>,
    pub parameters: Params,
    /// Output files relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
    pub status: RunStatus,
    pub failure: Option<String>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        write_json(&dir.join(MANIFEST_FILE), self)
    }

    pub fn read(dir: &Path) -> Result<Self, AppError> {
        let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Listed outputs that are missing or empty.
    pub fn missing_outputs(&self, dir: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|f| std::fs::metadata(dir.join(f)).map(|m| m.len() == 0).unwrap_or(true))
            .cloned()
            .collect()
    }
}
