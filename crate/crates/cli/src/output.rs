use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use hypkob::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::Seeds;

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Serialize)]
struct Versions {
    hypkob: &'static str,
    cli: &'static str,
}

#[derive(Debug, Serialize)]
struct Timing {
    started_unix: f64,
    finished_unix: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    options: &'a serde_json::Value,
    config_sha256: &'a str,
    seeds: &'a Seeds,
    graph_seed: u64,
    graph_nodes: usize,
    versions: Versions,
    outputs: &'a [Artifact],
    /// Wall-clock data, the only part that differs between replays.
    timing: Timing,
}

/// Output directory of one run. Artifacts are hashed as they are written
/// and listed in `manifest.json`.
pub struct Outputs {
    dir: PathBuf,
    artifacts: Vec<Artifact>,
    started: f64,
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            artifacts: Vec::new(),
            started: now(),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.artifacts.retain(|a| a.file != name);
        self.artifacts.push(Artifact {
            file: name.into(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<PathBuf> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(header).map_err(io)?;
        for r in rows {
            w.write_record(r).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.write_bytes(name, &bytes)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn finish(
        mut self,
        command: &str,
        options: &serde_json::Value,
        config_sha256: &str,
        seeds: &Seeds,
        graph_seed: u64,
        graph_nodes: usize,
    ) -> Result<()> {
        let artifacts = std::mem::take(&mut self.artifacts);
        let m = Manifest {
            command,
            options,
            config_sha256,
            seeds,
            graph_seed,
            graph_nodes,
            versions: Versions {
                hypkob: hypkob::VERSION,
                cli: env!("CARGO_PKG_VERSION"),
            },
            outputs: &artifacts,
            timing: Timing {
                started_unix: self.started,
                finished_unix: now(),
            },
        };
        let mut text = serde_json::to_string_pretty(&m).map_err(|e| Error::Io(e.to_string()))?;
        text.push('\n');
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join("manifest.json"), text)?;
        Ok(())
    }
}

/// Shortest round-trip decimal form.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
