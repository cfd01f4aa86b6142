use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::AppConfig;
use crate::error::{CliError, CliResult};

pub const TOOL_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

/// Record of what produced a directory of artifacts. Paths are relative to
/// the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub files: BTreeMap<String, String>,
}

impl RunManifest {
    pub fn new(cfg: &AppConfig) -> Self {
        Self {
            tool_version: TOOL_VERSION.into(),
            config_hash: cfg.hash(),
            seeds: BTreeMap::new(),
            files: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, name: &str, seed: u64) -> Self {
        self.seeds.insert(name.into(), seed);
        self
    }

    pub fn file(&mut self, key: &str, rel: impl Into<String>) {
        self.files.insert(key.into(), rel.into());
    }

    /// Every listed file must exist relative to `dir`.
    pub fn verify(&self, dir: &Path) -> CliResult<()> {
        for (key, rel) in &self.files {
            if !dir.join(rel).is_file() {
                return Err(CliError::MissingInput(format!(
                    "manifest entry {key}: {rel}"
                )));
            }
        }
        Ok(())
    }
}
