//! The run manifest: a JSON record of exactly how a command was invoked —
//! argv, resolved configuration, seeds, input and output paths, and content
//! hashes — written into the output directory before any long-running work,
//! so every run can be reproduced from its manifest alone.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use prodesign_core::io::atomic_write;
use prodesign_core::tokenize::vocab::VocabHashes;

use crate::CliError;

pub const RUN_MANIFEST: &str = "run-manifest.json";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: u32,
    pub command: String,
    pub argv: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Resolved configuration snapshot, after presets and overrides.
    pub config: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vocab: Option<VocabHashes>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resumed_from_step: Option<usize>,
    /// Unix seconds at launch. Deterministic commands (curate, build-vocab,
    /// evaluate) leave this out so a rerun reproduces their output
    /// directories byte for byte.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub started_unix: Option<u64>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunManifest {
            schema: 1,
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed: None,
            config,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            vocab: None,
            resumed_from_step: None,
            started_unix: None,
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn input(mut self, name: &str, path: &Path) -> Self {
        self.inputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn output(mut self, name: &str, path: &Path) -> Self {
        self.outputs.insert(name.to_string(), path.display().to_string());
        self
    }

    pub fn vocab(mut self, hashes: &VocabHashes) -> Self {
        self.vocab = Some(hashes.clone());
        self
    }

    pub fn resumed_from(mut self, step: usize) -> Self {
        self.resumed_from_step = Some(step);
        self
    }

    /// Record the wall-clock start; only for commands whose outputs are not
    /// expected to be byte-stable across reruns.
    pub fn stamped(mut self) -> Self {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.started_unix = Some(now);
        self
    }

    /// Write `run-manifest.json` into `dir`, creating the directory first.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(RUN_MANIFEST);
        // Pretty JSON is the one artifact meant for human eyes as much as
        // for tools.
        let mut text = serde_json::to_string_pretty(self).expect("manifest serialization");
        text.push('\n');
        atomic_write(&path, text.as_bytes()).map_err(|e| CliError::write(&path, &e))?;
        Ok(path)
    }
}
