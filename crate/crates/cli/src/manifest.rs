use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

/// Record of one command invocation, written as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of the effective configuration in canonical JSON.
    pub config_digest: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub tool_version: String,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
}

pub fn digest<T: Serialize>(config: &T) -> Result<(String, serde_json::Value), CliError> {
    let value = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
    // serde_json maps are ordered by key, so this form is canonical
    let canonical = serde_json::to_string(&value).map_err(|e| CliError::Runtime(e.to_string()))?;
    let hash = Sha256::digest(canonical.as_bytes());
    Ok((format!("{hash:x}"), value))
}

/// Collects files written into the output directory.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        self.write(name, text + "\n")
    }

    pub fn finish<T: Serialize>(
        mut self,
        command: &str,
        config: &T,
        seed: u64,
        started: std::time::Instant,
    ) -> Result<(), CliError> {
        let (config_digest, config) = digest(config)?;
        let mut outputs = self.written.clone();
        outputs.push("manifest.json".into());
        let manifest = RunManifest {
            command: command.to_string(),
            config_digest,
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            outputs,
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        self.write_json("manifest.json", &manifest)
    }
}
