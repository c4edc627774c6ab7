//! The run manifest: a self-contained record of one command invocation,
//! written with status `running` before work starts and finalized at
//! exit. The manifest embeds the fully resolved configuration, so
//! `neuropong run --config manifest.toml` reproduces the run it records.

use std::collections::BTreeMap;
use std::time::{SystemTime, UNIX_EPOCH};

use neuropong_core::config::ExperimentConfig;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Running,
    Complete,
    Failed,
}

/// Record of one command: tool identity, lifecycle status, timestamps,
/// the artifact map, and the configuration that produced everything.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seeds: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub input: Option<String>,
    pub start_time_unix_s: u64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub end_time_unix_s: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    /// Artifact name to path, relative to the manifest's directory.
    pub artifacts: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub config: Option<ExperimentConfig>,
}

impl RunManifest {
    pub fn begin(command: &str, config: Option<ExperimentConfig>) -> Self {
        RunManifest {
            manifest_version: 1,
            tool: "neuropong".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            status: Status::Running,
            seed: None,
            seeds: None,
            input: None,
            start_time_unix_s: unix_now_s(),
            end_time_unix_s: None,
            error: None,
            artifacts: BTreeMap::new(),
            config,
        }
    }

    /// Marks the manifest complete, or failed with the given message.
    pub fn finish(&mut self, outcome: Result<(), String>) {
        self.end_time_unix_s = Some(unix_now_s());
        match outcome {
            Ok(()) => self.status = Status::Complete,
            Err(message) => {
                self.status = Status::Failed;
                self.error = Some(message);
            }
        }
    }
}

pub fn unix_now_s() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}
