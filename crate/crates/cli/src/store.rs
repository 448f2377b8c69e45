//! Run persistence. Every run owns one directory under the output root; it
//! is assembled in a hidden temporary directory (manifest written last) and
//! renamed into place, so a visible run directory is always complete.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::experiments::{RunOutput, Verdict};
use crate::failure::Failure;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub kind: String,
    pub config: RunConfig,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub tolerances: Vec<(String, f64)>,
    pub verdict: VerdictRecord,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub passed: bool,
    pub detail: String,
}

impl From<Verdict> for VerdictRecord {
    fn from(v: Verdict) -> Self {
        Self { passed: v.passed, detail: v.detail }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

/// Directory name: experiment kind plus a digest of the effective config.
fn run_name(cfg: &RunConfig) -> Result<String, Failure> {
    let canonical = serde_json::to_vec(cfg)
        .map_err(|e| Failure::io("config snapshot", std::io::Error::other(e)))?;
    Ok(format!("{}-{}", cfg.experiment.name(), &sha256_hex(&canonical)[..12]))
}

fn io(context: &Path) -> impl Fn(std::io::Error) -> Failure + '_ {
    move |e| Failure::io(&context.display().to_string(), e)
}

/// Writes outputs and manifest into a fresh run directory under `root`.
/// Re-running an identical config adds a numbered sibling directory.
pub fn persist(
    root: &Path,
    cfg: &RunConfig,
    output: RunOutput,
    started: SystemTime,
    elapsed: Duration,
) -> Result<(PathBuf, RunManifest), Failure> {
    fs::create_dir_all(root).map_err(io(root))?;
    let base = run_name(cfg)?;
    let staging = root.join(format!(".staging-{base}-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(io(&staging))?;
    }
    fs::create_dir(&staging).map_err(io(&staging))?;
    let result = stage(&staging, cfg, output, started, elapsed).and_then(|manifest| {
        let mut k = 1;
        loop {
            let name = if k == 1 { base.clone() } else { format!("{base}-{k}") };
            let target = root.join(name);
            if !target.exists() {
                fs::rename(&staging, &target).map_err(io(&target))?;
                return Ok((target, manifest));
            }
            k += 1;
        }
    });
    if result.is_err() {
        let _ = fs::remove_dir_all(&staging);
    }
    result
}

fn stage(
    dir: &Path,
    cfg: &RunConfig,
    output: RunOutput,
    started: SystemTime,
    elapsed: Duration,
) -> Result<RunManifest, Failure> {
    let mut files = Vec::new();
    for (name, bytes) in &output.files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(io(&path))?;
        files.push(FileEntry {
            name: name.clone(),
            bytes: bytes.len() as u64,
            sha256: sha256_hex(bytes),
        });
    }
    let manifest = RunManifest {
        tool: env!("CARGO_BIN_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        kind: cfg.experiment.name().to_string(),
        config: cfg.clone(),
        started_unix_seconds: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        wall_clock_seconds: elapsed.as_secs_f64(),
        tolerances: cfg.tolerances(),
        verdict: output.verdict.into(),
        files,
    };
    let mut json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| Failure::io("manifest", std::io::Error::other(e)))?;
    json.push(b'\n');
    let path = dir.join(MANIFEST);
    fs::write(&path, json).map_err(io(&path))?;
    Ok(manifest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryEntry {
    pub run: String,
    pub kind: Option<String>,
    pub passed: Option<bool>,
    /// Empty when the manifest parses and every file matches its hash.
    pub problems: Vec<String>,
}

/// Scans `root` for run directories and verifies their manifests. Problems
/// are reported per run; only an unreadable root is an error.
pub fn list_runs(root: &Path) -> Result<Vec<InventoryEntry>, Failure> {
    if !root.exists() {
        return Ok(Vec::new());
    }
    let mut dirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(io(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .filter(|p| !p.file_name().is_some_and(|n| n.to_string_lossy().starts_with('.')))
        .collect();
    dirs.sort();
    Ok(dirs.iter().map(|d| inspect(d)).collect())
}

fn inspect(dir: &Path) -> InventoryEntry {
    let run = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let mut entry = InventoryEntry { run, kind: None, passed: None, problems: Vec::new() };
    let manifest: RunManifest = match fs::read(dir.join(MANIFEST))
        .map_err(|e| e.to_string())
        .and_then(|b| serde_json::from_slice(&b).map_err(|e| e.to_string()))
    {
        Ok(m) => m,
        Err(e) => {
            entry.problems.push(format!("corrupted or missing manifest: {e}"));
            return entry;
        }
    };
    entry.kind = Some(manifest.kind.clone());
    entry.passed = Some(manifest.verdict.passed);
    for f in &manifest.files {
        match fs::read(dir.join(&f.name)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 => {}
            Ok(_) => entry.problems.push(format!("{}: hash mismatch", f.name)),
            Err(e) => entry.problems.push(format!("{}: {e}", f.name)),
        }
    }
    entry
}
