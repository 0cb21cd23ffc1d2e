use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::artifact::{sha256_hex, write_json};

pub use crate::artifact::BUILD_ID;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct ArtifactEntry {
    /// Relative to the stage directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one command run, written atomically when it ends. Timestamps
/// make it the one artifact that differs between identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the `config.json` stored next to this manifest.
    pub config_sha256: String,
    pub build: String,
    pub base_seed: u64,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    pub artifacts: Vec<ArtifactEntry>,
    pub exit_status: i32,
    #[serde(default)]
    pub message: Option<String>,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

/// Hash each listed file under `stage_dir`; missing files are skipped.
pub fn artifact_entries(stage_dir: &Path, files: &[String]) -> Vec<ArtifactEntry> {
    files
        .iter()
        .filter_map(|f| std::fs::read(stage_dir.join(f)).ok().map(|b| ArtifactEntry { path: f.clone(), sha256: sha256_hex(&b) }))
        .collect()
}

pub fn write_manifest(stage_dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    write_json(&stage_dir.join("manifest.json"), manifest)
}

pub fn read_manifest(stage_dir: &Path) -> Option<RunManifest> {
    let bytes = std::fs::read(stage_dir.join("manifest.json")).ok()?;
    serde_json::from_slice(&bytes).ok()
}
