use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MANIFEST_NAME: &str = "manifest.json";

/// Written once per output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_hash: String,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// Collects the files a command writes into one directory, then records them.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    started: f64,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), command: command.to_string(), started: now_unix(), inputs: vec![], outputs: vec![] })
    }

    pub fn path(&self) -> &Path {
        &self.dir
    }

    pub fn add_input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    /// Opens `name` for writing and records it as an output.
    pub fn file(&mut self, name: &str) -> Result<fs::File, CliError> {
        let p = self.dir.join(name);
        let f = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        self.outputs.push(name.to_string());
        Ok(f)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let f = self.file(name)?;
        serde_json::to_writer_pretty(f, value)?;
        Ok(())
    }

    pub fn finish(self, config_hash: String) -> Result<RunManifest, CliError> {
        let m = RunManifest {
            command: self.command,
            config_hash,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: self.started,
            finished_unix: now_unix(),
            inputs: self.inputs,
            outputs: self.outputs,
        };
        let p = self.dir.join(MANIFEST_NAME);
        let f = fs::File::create(&p).map_err(|e| CliError::io(&p, e))?;
        serde_json::to_writer_pretty(f, &m)?;
        Ok(m)
    }
}
