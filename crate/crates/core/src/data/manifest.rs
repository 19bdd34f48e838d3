use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::noise::NoiseSpec;
use super::split::Split;
use crate::error::{Error, Result};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestRecord {
    pub id: String,
    /// Relative to the manifest's directory.
    pub clean: String,
    /// Relative to the manifest's directory; absent until noise is applied.
    pub noisy: Option<String>,
}

/// The transfer bundle: image pairs, splits and the noise that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: u32,
    pub records: Vec<ManifestRecord>,
    pub split: Split,
    pub noise: Option<NoiseSpec>,
    pub resize_to: usize,
    pub created_seed: u64,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.version != MANIFEST_VERSION {
            return Err(Error::Format(format!(
                "manifest version {} unsupported (expected {MANIFEST_VERSION})",
                m.version
            )));
        }
        m.validate()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Splits are disjoint, cover every record, and reference known ids.
    pub fn validate(&self) -> Result<()> {
        let ids: HashSet<&str> = self.records.iter().map(|r| r.id.as_str()).collect();
        if ids.len() != self.records.len() {
            return Err(Error::Format("manifest has duplicate record ids".into()));
        }
        let mut seen = HashSet::new();
        for id in self
            .split
            .train
            .iter()
            .chain(&self.split.val)
            .chain(&self.split.test)
        {
            if !ids.contains(id.as_str()) {
                return Err(Error::Format(format!("split references unknown id {id}")));
            }
            if !seen.insert(id.as_str()) {
                return Err(Error::Format(format!(
                    "id {id} appears in more than one split"
                )));
            }
        }
        if seen.len() != ids.len() {
            return Err(Error::Format("splits do not cover every record".into()));
        }
        Ok(())
    }

    /// Noise is populated and every noisy file exists under `base`.
    pub fn validate_noisy(&self, base: &Path) -> Result<()> {
        if self.noise.is_none() {
            return Err(Error::Format("manifest has no noise applied yet".into()));
        }
        for r in &self.records {
            let rel = r
                .noisy
                .as_ref()
                .ok_or_else(|| Error::Format(format!("record {} has no noisy image", r.id)))?;
            let p = base.join(rel);
            if !p.is_file() {
                return Err(Error::Format(format!(
                    "noisy image {} is missing",
                    p.display()
                )));
            }
        }
        Ok(())
    }

    pub fn record(&self, id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.id == id)
    }
}

/// Directory that relative manifest paths resolve against.
pub fn base_dir(manifest_path: &Path) -> PathBuf {
    manifest_path
        .parent()
        .filter(|d| !d.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."))
}
