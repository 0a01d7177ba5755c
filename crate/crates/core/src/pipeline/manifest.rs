use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::util;

/// Record of one mutating command: what went in, what came out, with digests.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    /// Path to SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
}

impl RunManifest {
    pub fn new(command: &str, config_hash: &str) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            ..Default::default()
        }
    }

    pub fn add_input(&mut self, key: String, path: &Path) -> Result<()> {
        self.inputs.insert(key, util::file_digest(path)?);
        Ok(())
    }

    pub fn add_output(&mut self, key: String, path: &Path) -> Result<()> {
        self.outputs.insert(key, util::file_digest(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        util::write_atomic(path, &bytes)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    /// Recompute output digests; `root` resolves relative keys. Returns the
    /// keys whose digest differs or whose file is missing.
    pub fn verify_outputs(&self, root: &Path) -> Vec<String> {
        self.outputs
            .iter()
            .filter(|(k, d)| {
                let p = root.join(k);
                util::file_digest(&p).map(|x| &x != *d).unwrap_or(true)
            })
            .map(|(k, _)| k.clone())
            .collect()
    }
}

/// Append-only JSON Lines event log.
#[derive(Debug)]
pub struct EventLog {
    path: Option<PathBuf>,
    lock: Mutex<()>,
}

impl EventLog {
    pub fn to_file(path: PathBuf) -> Self {
        EventLog {
            path: Some(path),
            lock: Mutex::new(()),
        }
    }

    pub fn disabled() -> Self {
        EventLog {
            path: None,
            lock: Mutex::new(()),
        }
    }

    pub fn emit(&self, stage: &str, event: &str, data: Value) {
        let Some(path) = &self.path else { return };
        let ts_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0);
        let line = serde_json::json!({"ts_ms": ts_ms, "stage": stage, "event": event, "data": data});
        let _guard = self.lock.lock().expect("poisoned");
        if let Some(dir) = path.parent() {
            let _ = std::fs::create_dir_all(dir);
        }
        let written = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .and_then(|mut f| writeln!(f, "{line}"));
        if let Err(e) = written {
            log::warn!("cannot append to {}: {e}", path.display());
        }
    }
}
