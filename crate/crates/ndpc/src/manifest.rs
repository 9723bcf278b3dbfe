use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io_err, Result};
use crate::io::write_json;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    pub name: String,
    pub value: f64,
    pub warn_above: f64,
    pub fail_above: f64,
    pub status: GateStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateStatus {
    Ok,
    Warn,
    Fail,
}

impl GateResult {
    pub fn new(name: impl Into<String>, value: f64, warn_above: f64, fail_above: f64) -> Self {
        let status = if !(value <= fail_above) {
            GateStatus::Fail
        } else if value > warn_above {
            GateStatus::Warn
        } else {
            GateStatus::Ok
        };
        Self {
            name: name.into(),
            value,
            warn_above,
            fail_above,
            status,
        }
    }
}

/// Record of one command invocation, written as `manifest.json` in the
/// output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub code_version: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<PathBuf>,
    pub gates: Vec<GateResult>,
    pub started_unix: u64,
    pub wall_seconds: f64,
    pub exit_code: i32,
    pub error: Option<String>,
    #[serde(skip)]
    clock: Option<Instant>,
}

impl RunManifest {
    pub fn start(command: &str, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            config: serde_json::Value::Null,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            gates: Vec::new(),
            started_unix: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
            wall_seconds: 0.0,
            exit_code: 0,
            error: None,
            clock: Some(Instant::now()),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = std::fs::read(path).map_err(io_err(path))?;
        self.inputs.push(InputDigest {
            path: path.to_path_buf(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    pub fn finish(&mut self, dir: &Path, exit_code: i32, error: Option<String>) -> Result<()> {
        self.wall_seconds = self.clock.map_or(0.0, |c| c.elapsed().as_secs_f64());
        self.exit_code = exit_code;
        self.error = error;
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_json(&dir.join("manifest.json"), self)
    }
}
