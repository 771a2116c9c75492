//! Output directories, the single-writer lock and run manifests.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "run-manifest.json";
const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// SHA-256 of `config` serialized as compact JSON.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub inputs: Vec<Artifact>,
    pub outputs: Vec<Artifact>,
    pub seed: Option<u64>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub tool_version: String,
}

pub fn config_hash(config: &serde_json::Value) -> String {
    hex::encode(Sha256::digest(serde_json::to_vec(config).expect("json value serializes")))
}

pub fn file_sha256(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Honors SOURCE_DATE_EPOCH so manifests can be byte-reproducible too.
fn now_unix() -> u64 {
    if let Some(t) = std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|v| v.parse().ok()) {
        return t;
    }
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

fn walk(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        let p = e.path();
        if p.is_dir() {
            walk(&p, out)?;
        } else {
            out.push(p);
        }
    }
    Ok(())
}

/// Files under `path` (or `path` itself), sorted.
fn files_of(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut v = Vec::new();
        walk(path, &mut v)?;
        Ok(v)
    } else if path.exists() {
        Ok(vec![path.to_path_buf()])
    } else {
        bail!("input {} does not exist", path.display())
    }
}

/// An output directory held for the lifetime of one command.
pub struct OutDir {
    root: PathBuf,
    lock: PathBuf,
    command: String,
    inputs: Vec<PathBuf>,
    started: u64,
}

impl OutDir {
    /// Creates `root`, takes its lock and refuses to write over any input.
    pub fn acquire(root: &Path, command: &str, inputs: &[&Path]) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let canon = root.canonicalize()?;
        for input in inputs {
            let c = input.canonicalize().with_context(|| format!("input {} does not exist", input.display()))?;
            if c.starts_with(&canon) || canon == c {
                return Err(sid_core::SidError::InvalidConfig(format!(
                    "output directory {} contains input {}",
                    root.display(),
                    input.display()
                ))
                .into());
            }
        }
        let lock = root.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&lock).with_context(|| {
            format!("{} is locked by another run (remove {} if it is stale)", root.display(), lock.display())
        })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self {
            root: root.to_path_buf(),
            lock,
            command: command.into(),
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            started: now_unix(),
        })
    }

    pub fn path(&self, rel: impl AsRef<Path>) -> PathBuf {
        self.root.join(rel)
    }

    pub fn write(&self, rel: impl AsRef<Path>, text: &str) -> Result<PathBuf> {
        let p = self.path(rel);
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
        let mut f = File::create(&p).with_context(|| format!("writing {}", p.display()))?;
        f.write_all(text.as_bytes())?;
        Ok(p)
    }

    /// Lists every file under the directory and writes the manifest.
    pub fn finish(self, config: serde_json::Value, seed: Option<u64>) -> Result<RunManifest> {
        let mut inputs = Vec::new();
        for i in &self.inputs {
            for f in files_of(i)? {
                inputs.push(Artifact { path: f.display().to_string(), sha256: file_sha256(&f)? });
            }
        }
        let mut outputs = Vec::new();
        for f in files_of(&self.root)? {
            let rel = f.strip_prefix(&self.root).expect("under root");
            if rel == Path::new(LOCK_FILE) || rel == Path::new(MANIFEST_FILE) {
                continue;
            }
            outputs.push(Artifact { path: rel.display().to_string(), sha256: file_sha256(&f)? });
        }
        let manifest = RunManifest {
            command: self.command.clone(),
            config_hash: config_hash(&config),
            config,
            inputs,
            outputs,
            seed,
            started_unix: self.started,
            finished_unix: now_unix(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
        };
        self.write(MANIFEST_FILE, &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
        Ok(manifest)
    }
}

impl Drop for OutDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}
