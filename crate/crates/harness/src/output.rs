//! Run directories, manifests and CSV tables. Every file carries the config hash and master seed.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

pub const TOOL: &str = "ossheet";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
}

/// `out/<name>-<hash>` with its manifest.
#[derive(Debug, Clone)]
pub struct RunDir {
    pub path: PathBuf,
    pub hash: String,
    pub seed: u64,
}

impl RunDir {
    pub fn create(out: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let hash = cfg.hash();
        let name: String = cfg.name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect();
        let path = out.join(format!("{name}-{hash}"));
        std::fs::create_dir_all(&path).with_context(|| format!("creating {}", path.display()))?;
        let manifest = Manifest { tool: TOOL.into(), version: VERSION.into(), config_hash: hash.clone(), seed: cfg.seed, config: cfg.clone() };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        std::fs::write(path.join(MANIFEST), text).with_context(|| format!("writing manifest in {}", path.display()))?;
        Ok(RunDir { path, hash, seed: cfg.seed })
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    /// Writes `name` with the provenance columns `config_hash,seed` in front of `header`.
    pub fn table(&self, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf> {
        let path = self.file(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        let mut h = vec!["config_hash", "seed"];
        h.extend_from_slice(header);
        w.write_record(&h)?;
        let seed = self.seed.to_string();
        for r in rows {
            let mut rec = vec![self.hash.clone(), seed.clone()];
            rec.extend(r.iter().cloned());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let p = dir.join(MANIFEST);
    let text = std::fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", p.display()))
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    format!("{x}")
}
