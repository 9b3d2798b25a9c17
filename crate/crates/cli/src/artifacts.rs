//! Artifact plumbing: every subcommand writes its machine-readable
//! output as JSON into the `--out` directory, and later steps read those
//! files back instead of re-deriving earlier results. That makes the
//! workflow's ordering checkable: `estimate` refuses to run before
//! `identify` has written its artifact, and `sensitivity` refuses a
//! config file edited after estimation.
//!
//! Envelope shape, shared by all artifacts:
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "command": "identify",
//!   "inputs": { "graph": { "path": "...", "sha256": "..." }, ... },
//!   "content": { ... },
//!   "metadata": { "generated_at": 1755000000 }
//! }
//! ```
//!
//! Everything outside `metadata` is a deterministic function of the
//! inputs and seed; re-running a command reproduces it byte for byte.
//! Timestamps live only in `metadata`.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use roadmap_engine::{EngineError, Result};

pub const SCHEMA_VERSION: u64 = 1;

/// Directory of step artifacts.
pub struct ArtifactStore {
    dir: PathBuf,
}

/// One named input file, hashed into the artifact envelope.
pub struct Input {
    pub label: &'static str,
    pub path: PathBuf,
    pub sha256: String,
}

/// Hash a file's bytes (lowercase hex), reading it fully.
pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// Seconds since the Unix epoch of the file's last modification.
pub fn mtime_seconds(path: &Path) -> Result<u64> {
    let meta = std::fs::metadata(path)
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    let modified = meta
        .modified()
        .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
    Ok(modified.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0))
}

pub fn now_seconds() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl ArtifactStore {
    pub fn new(dir: &Path) -> Result<ArtifactStore> {
        std::fs::create_dir_all(dir)
            .map_err(|e| EngineError::Io { path: dir.display().to_string(), source: e })?;
        Ok(ArtifactStore { dir: dir.to_path_buf() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(format!("{name}.json"))
    }

    /// Hash an input file for the envelope.
    pub fn input(&self, label: &'static str, path: &Path) -> Result<Input> {
        Ok(Input { label, path: path.to_path_buf(), sha256: sha256_file(path)? })
    }

    /// Write `content` under the standard envelope; returns the path.
    pub fn write(
        &self,
        name: &str,
        command: &str,
        inputs: &[Input],
        content: Value,
    ) -> Result<PathBuf> {
        let mut input_map = Map::new();
        for i in inputs {
            input_map.insert(
                i.label.to_string(),
                json!({ "path": i.path.display().to_string(), "sha256": i.sha256 }),
            );
        }
        let envelope = json!({
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "inputs": Value::Object(input_map),
            "content": content,
            "metadata": { "generated_at": now_seconds() },
        });
        let path = self.path(name);
        let text = serde_json::to_string_pretty(&envelope).expect("artifact serializes") + "\n";
        std::fs::write(&path, text)
            .map_err(|e| EngineError::Io { path: path.display().to_string(), source: e })?;
        Ok(path)
    }

    /// Read an artifact if present.
    pub fn read(&self, name: &str) -> Result<Option<Value>> {
        let path = self.path(name);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => {
                return Err(EngineError::Io { path: path.display().to_string(), source: e })
            }
        };
        let value: Value = serde_json::from_str(&text).map_err(|e| EngineError::ConfigInvalid {
            message: format!("artifact {} is not valid JSON: {e}", path.display()),
        })?;
        Ok(Some(value))
    }

    /// Read an artifact that an earlier step must have produced.
    /// `missing_step` names that step in the error, e.g. "Step 3".
    pub fn require(&self, name: &str, missing_step: &str) -> Result<Value> {
        self.read(name)?.ok_or_else(|| EngineError::PreSpecification {
            message: format!(
                "{missing_step} missing — no {} artifact at {}; run the earlier step first",
                name,
                self.path(name).display()
            ),
        })
    }
}

/// Pull a required field out of an artifact, with a readable error.
pub fn field<'v>(value: &'v Value, pointer: &str) -> Result<&'v Value> {
    value.pointer(pointer).ok_or_else(|| EngineError::ConfigInvalid {
        message: format!("artifact is missing `{pointer}`"),
    })
}
