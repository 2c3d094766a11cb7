use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde_json::Value;

/// Every fixture shipped with the testkit.
pub const ALL: &[&str] = &[
    "basic",
    "arrays",
    "random-attr",
    "random-attr-fixed",
    "clock",
    "clock-fixed",
    "banner",
    "token",
    "shadow",
    "fallback-group",
    "sentinel",
    "client-error",
];

pub fn fixtures_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub name: String,
    pub dir: PathBuf,
    /// Interaction script text (`script.cfg`).
    pub script: String,
    pub api_body: Vec<u8>,
    /// Canonical paths of the fields the page actually uses.
    pub manifest: Vec<String>,
}

impl Fixture {
    pub fn load(name: &str) -> io::Result<Self> {
        let dir = fixtures_dir().join(name);
        let script = fs::read_to_string(dir.join("script.cfg"))?;
        let api_body = fs::read(dir.join("api.json"))?;
        let manifest: Value = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
        let manifest = manifest
            .as_array()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "manifest is not an array"))?
            .iter()
            .map(|v| v.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidData, "manifest entries must be strings"))?;
        Ok(Self {
            name: name.to_string(),
            dir,
            script,
            api_body,
            manifest,
        })
    }

    pub fn api_json(&self) -> Value {
        serde_json::from_slice(&self.api_body).expect("fixture api.json parses")
    }
}
