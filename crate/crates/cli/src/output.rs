//! Atomic artifact writing and the run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use moran_assort::rng::RNG_ALGORITHM;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{runtime, CliResult};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SeedLineage {
    pub master_seed: u64,
    /// `config` or `--seed`.
    pub source: &'static str,
    pub rng: &'static str,
    pub replica_streams: String,
}

impl SeedLineage {
    pub fn new(master_seed: u64, overridden: bool, replicas: u64) -> Self {
        Self {
            master_seed,
            source: if overridden { "--seed" } else { "config" },
            rng: RNG_ALGORITHM,
            replica_streams: format!("replica r in 0..{replicas} uses stream r of master_seed"),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    pub seed: Option<SeedLineage>,
    pub files: Vec<FileEntry>,
    pub wall_clock_seconds: f64,
}

/// Output directory that records a checksum for every file it writes.
pub struct OutputDir {
    dir: PathBuf,
    files: Vec<FileEntry>,
    started: Instant,
}

impl OutputDir {
    pub fn create(dir: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|e| runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), files: Vec::new(), started: Instant::now() })
    }

    /// Writes `bytes` under a temporary name, then renames it into place.
    fn write_atomic(&self, name: &str, bytes: &[u8]) -> CliResult<()> {
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        tmp.write_all(bytes)?;
        tmp.as_file().sync_all()?;
        tmp.persist(self.dir.join(name)).map_err(|e| runtime(e.error))?;
        Ok(())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> CliResult<()> {
        self.write_atomic(name, bytes)?;
        self.files.push(FileEntry {
            name: name.to_string(),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(runtime)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    /// Writes the manifest last, listing every file written before it.
    pub fn finish(self, command: &str, config: serde_json::Value, seed: Option<SeedLineage>) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config,
            seed,
            files: self.files.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        let mut text = serde_json::to_string_pretty(&manifest).map_err(runtime)?;
        text.push('\n');
        self.write_atomic(MANIFEST_NAME, text.as_bytes())?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_checksums() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path()).unwrap();
        out.write("a.csv", b"abc").unwrap();
        let m = out.finish("test", serde_json::Value::Null, None).unwrap();
        assert_eq!(m.files.len(), 1);
        assert_eq!(m.files[0].sha256, "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
        let names: Vec<_> = std::fs::read_dir(tmp.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
        assert_eq!(names.len(), 2);
    }
}
