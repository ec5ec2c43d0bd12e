use std::path::{Path, PathBuf};

use rankhc::{Error, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Null table consulted by a run.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TableUse {
    /// `file`, `cache`, `tabulated` or `tabulated-cached`.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub n: usize,
    pub t: usize,
    pub grid: String,
    pub k_n: u32,
    pub mc_pq: usize,
    pub mc_t: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OutputRecord {
    /// `None` for stdout.
    pub path: Option<PathBuf>,
    pub sha256: String,
    pub bytes: usize,
}

impl OutputRecord {
    pub fn new(path: Option<PathBuf>, data: &[u8]) -> Self {
        Self {
            path,
            sha256: hex::encode(Sha256::digest(data)),
            bytes: data.len(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub library_version: String,
    pub command: String,
    /// Arguments that reproduce the run, with any drawn seed made explicit.
    pub replay_args: Vec<String>,
    pub seed: Option<u64>,
    /// `fixed` or `random`.
    pub seed_source: Option<String>,
    pub threads: Option<usize>,
    pub config: serde_json::Value,
    pub tables: Vec<TableUse>,
    pub outputs: Vec<OutputRecord>,
    #[serde(default)]
    pub result: serde_json::Value,
    /// Wall-clock fields; everything else is reproducible.
    pub started_unix_secs: f64,
    pub elapsed_secs: f64,
}

impl Manifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)? + "\n";
        write_file(path, text.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn write_file(path: &Path, data: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    std::fs::write(path, data).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// `argv` without the program name and with `--random-seed` replaced by the
/// seed actually drawn.
pub fn replay_args(argv: &[String], seed: Option<u64>) -> Vec<String> {
    let mut out = Vec::with_capacity(argv.len() + 1);
    for a in argv.iter().skip(1) {
        match (a.as_str(), seed) {
            ("--random-seed", Some(s)) => {
                out.push("--seed".to_string());
                out.push(s.to_string());
            }
            _ => out.push(a.clone()),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_seed_is_pinned() {
        let argv: Vec<String> = ["rankhc", "perm-hc", "--random-seed", "--input", "x.csv"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert_eq!(replay_args(&argv, Some(9)), ["perm-hc", "--seed", "9", "--input", "x.csv"]);
    }
}
