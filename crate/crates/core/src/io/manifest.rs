//! Run manifests: everything needed to reproduce a run.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::{BASIS_RULE, PARTITION_RULE};
use crate::spectral::NORM_CONVENTION;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Fully resolved parameters of the run.
    pub config: serde_json::Value,
    pub seed: u64,
    pub scheme: Option<String>,
    pub norm_convention: String,
    pub partition_rule: String,
    pub basis_rule: String,
    /// Milliseconds since the Unix epoch when the run started.
    pub started_unix_ms: u128,
}

impl RunManifest {
    pub fn new(command: &str, config: impl Serialize, seed: u64, scheme: Option<&str>) -> Self {
        let started_unix_ms =
            SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
        RunManifest {
            tool: "gmnse".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config: serde_json::to_value(config).expect("config serializes"),
            seed,
            scheme: scheme.map(str::to_string),
            norm_convention: NORM_CONVENTION.into(),
            partition_rule: PARTITION_RULE.into(),
            basis_rule: BASIS_RULE.into(),
            started_unix_ms,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json() + "\n")
            .map_err(|source| Error::Io { path: Some(path.to_path_buf()), source })
    }
}

/// `<out>.manifest.json` next to the output file.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}
