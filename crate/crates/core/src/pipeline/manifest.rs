use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TomoError};

use super::config::RunConfig;

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

/// Files produced for one sample under one photon condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub photons_per_ray: f64,
    pub repeat: u32,
    /// Seed of this sample's Poisson draw.
    pub seed: u64,
    pub expected_file: String,
    pub measurement_file: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mle_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fbp_file: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub split: Split,
    /// Seed of the truth volume.
    pub seed: u64,
    pub truth_file: String,
    #[serde(default)]
    pub conditions: Vec<ConditionRecord>,
}

impl SampleRecord {
    pub fn condition(&self, photons: f64, repeat: u32) -> Option<&ConditionRecord> {
        self.conditions.iter().find(|c| c.photons_per_ray == photons && c.repeat == repeat)
    }

    pub fn condition_mut(&mut self, photons: f64, repeat: u32) -> Option<&mut ConditionRecord> {
        self.conditions.iter_mut().find(|c| c.photons_per_ray == photons && c.repeat == repeat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub geometry_hash: String,
    pub config: RunConfig,
    pub samples: Vec<SampleRecord>,
    /// SHA-256 of every referenced file, keyed by path relative to the run.
    pub checksums: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| TomoError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Problems found by [`DatasetManifest::verify`].
#[derive(Debug, Default, Clone, PartialEq)]
pub struct Verification {
    pub missing: Vec<String>,
    pub mismatched: Vec<String>,
    /// Tensor files under the run directory that nothing references.
    pub orphans: Vec<String>,
}

impl Verification {
    pub fn is_clean(&self) -> bool {
        self.missing.is_empty() && self.mismatched.is_empty() && self.orphans.is_empty()
    }
}

fn collect_tensors(root: &Path, dir: &Path, out: &mut Vec<String>) -> Result<()> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(()),
    };
    for entry in entries {
        let entry = entry.map_err(|e| TomoError::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            collect_tensors(root, &path, out)?;
        } else if path.extension().is_some_and(|e| e == "tomo") {
            if let Ok(rel) = path.strip_prefix(root) {
                out.push(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    Ok(())
}

impl DatasetManifest {
    pub fn new(config: RunConfig, geometry_hash: String) -> Self {
        DatasetManifest { schema_version: SCHEMA_VERSION, geometry_hash, config, samples: Vec::new(), checksums: BTreeMap::new() }
    }

    pub fn path(root: &Path) -> PathBuf {
        root.join(MANIFEST_FILE)
    }

    pub fn load(root: &Path) -> Result<Self> {
        let path = Self::path(root);
        let text = fs::read_to_string(&path)
            .map_err(|_| TomoError::Missing(format!("no manifest at {}; run `gen` first", path.display())))?;
        let m: DatasetManifest = serde_json::from_str(&text)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(TomoError::Format { path, msg: format!("unsupported schema_version {}", m.schema_version) });
        }
        Ok(m)
    }

    /// Atomic write of the pretty-printed manifest.
    pub fn save(&self, root: &Path) -> Result<()> {
        fs::create_dir_all(root).map_err(|e| TomoError::io(root, e))?;
        let path = Self::path(root);
        let tmp = path.with_extension("json.tmp");
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(&tmp, text).map_err(|e| TomoError::io(&tmp, e))?;
        fs::rename(&tmp, &path).map_err(|e| TomoError::io(&path, e))
    }

    /// Record the checksum of `rel` (relative to `root`).
    pub fn record(&mut self, root: &Path, rel: &str) -> Result<()> {
        let digest = sha256_file(&root.join(rel))?;
        self.checksums.insert(rel.to_string(), digest);
        Ok(())
    }

    pub fn referenced_files(&self) -> Vec<String> {
        let mut files = Vec::new();
        for s in &self.samples {
            files.push(s.truth_file.clone());
            for c in &s.conditions {
                files.push(c.expected_file.clone());
                files.push(c.measurement_file.clone());
                files.extend(c.mle_file.iter().cloned());
                files.extend(c.fbp_file.iter().cloned());
            }
        }
        files
    }

    pub fn verify(&self, root: &Path) -> Result<Verification> {
        let mut v = Verification::default();
        let referenced = self.referenced_files();
        for rel in &referenced {
            let path = root.join(rel);
            if !path.exists() {
                v.missing.push(rel.clone());
                continue;
            }
            match self.checksums.get(rel) {
                Some(want) if *want == sha256_file(&path)? => {}
                _ => v.mismatched.push(rel.clone()),
            }
        }
        let mut on_disk = Vec::new();
        for sub in ["truths", "conditions"] {
            collect_tensors(root, &root.join(sub), &mut on_disk)?;
        }
        let known: std::collections::HashSet<&String> = referenced.iter().collect();
        v.orphans = on_disk.into_iter().filter(|f| !known.contains(f)).collect();
        v.orphans.sort();
        Ok(v)
    }
}
