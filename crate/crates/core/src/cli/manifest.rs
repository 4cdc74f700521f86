use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::CliError;

/// Record of one command invocation, written beside its outputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    pub tool_version: String,
    /// Fully resolved configuration after defaults, config file and flags.
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub started_unix_ms: u128,
    pub wall_seconds: f64,
}

pub struct ManifestBuilder {
    manifest: RunManifest,
    start: Instant,
}

impl ManifestBuilder {
    pub fn start(command: &str, argv: &[String]) -> Self {
        let started_unix_ms = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis())
            .unwrap_or(0);
        Self {
            manifest: RunManifest {
                command: command.into(),
                argv: argv.to_vec(),
                tool_version: env!("CARGO_PKG_VERSION").into(),
                config: serde_json::Value::Null,
                seeds: BTreeMap::new(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_unix_ms,
                wall_seconds: 0.0,
            },
            start: Instant::now(),
        }
    }

    pub fn config(&mut self, config: serde_json::Value) -> &mut Self {
        self.manifest.config = config;
        self
    }

    pub fn seed(&mut self, name: &str, seed: u64) -> &mut Self {
        self.manifest.seeds.insert(name.into(), seed);
        self
    }

    pub fn input(&mut self, path: &Path) -> &mut Self {
        self.manifest.inputs.push(path.to_path_buf());
        self
    }

    pub fn output(&mut self, path: &Path) -> &mut Self {
        self.manifest.outputs.push(path.to_path_buf());
        self
    }

    /// Stamps the elapsed time and writes the manifest atomically to `path`.
    pub fn finish(&mut self, path: &Path) -> Result<RunManifest, CliError> {
        self.manifest.wall_seconds = self.start.elapsed().as_secs_f64();
        let bytes = serde_json::to_vec_pretty(&self.manifest).map_err(CliError::io)?;
        crate::fsutil::write_atomic(path, &bytes)?;
        Ok(self.manifest.clone())
    }
}

/// `<dir>/manifest.json` for directory outputs, `<file>.manifest.json` otherwise.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    if output.is_dir() {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}
