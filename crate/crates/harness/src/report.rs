//! Aggregates run directories into one summary, re-deriving every target from the manifests.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};

use ossheet::synthesis::read_field;

use crate::experiments::{targets, Verdict};
use crate::output::{read_manifest, Manifest, MANIFEST, TOOL, VERSION};

pub const NOTE: &str = "Dimensions are box-counting estimates; for these sheets the Hausdorff and box dimensions of the graph agree almost surely, so they also estimate the Hausdorff dimension.";

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub fields: usize,
    pub verdicts: Vec<Verdict>,
}

impl RunSummary {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }
}

#[derive(Debug, Clone, Default)]
pub struct Summary {
    /// Sorted by config hash.
    pub runs: Vec<RunSummary>,
}

impl Summary {
    pub fn passed(&self) -> bool {
        self.runs.iter().all(RunSummary::passed)
    }

    pub fn render(&self) -> String {
        let mut s = format!("{NOTE}\n");
        s += "config_hash       name                     checks  verdict  headline\n";
        for r in &self.runs {
            let head = r
                .verdicts
                .iter()
                .find(|v| v.quantity == "dimension")
                .or(r.verdicts.first())
                .map(|v| format!("{} = {:.4} ± {:.4} (target {:.4})", v.quantity, v.estimate, v.stderr, v.target))
                .unwrap_or_else(|| format!("{} field files", r.fields));
            s += &format!(
                "{:<17} {:<24} {:>6}  {:<7}  {head}\n",
                r.manifest.config_hash,
                r.manifest.config.name,
                r.verdicts.len(),
                if r.passed() { "PASS" } else { "FAIL" }
            );
        }
        s
    }
}

fn find_runs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if dir.join(MANIFEST).is_file() {
        out.push(dir.to_path_buf());
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<_>>()?;
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_runs(&p, out)?;
        }
    }
    Ok(())
}

fn read_summary(path: &Path, hash: &str) -> Result<Vec<Verdict>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.with_context(|| format!("reading {}", path.display()))?;
        let f = |i: usize| rec.get(i).unwrap_or("");
        if f(0) != hash {
            bail!("{}: config hash {} does not match the manifest ({hash})", path.display(), f(0));
        }
        let p = |i: usize| -> Result<f64> { f(i).parse().with_context(|| format!("{}: bad number {:?}", path.display(), f(i))) };
        out.push(Verdict {
            quantity: f(2).into(),
            target: p(3)?,
            estimate: p(4)?,
            stderr: p(5)?,
            tolerance: p(6)?,
            rule: f(7).into(),
            passed: f(8) == "pass",
        });
    }
    Ok(out)
}

fn summarize(dir: &Path) -> Result<RunSummary> {
    let manifest = read_manifest(dir)?;
    let cfg = &manifest.config;
    if cfg.hash() != manifest.config_hash {
        bail!("{}: manifest hash {} does not match its config", dir.display(), manifest.config_hash);
    }
    let spec = cfg.validate().with_context(|| format!("config in {}", dir.display()))?;
    let tg = targets(cfg, &spec);
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    files.sort();
    let mut verdicts = Vec::new();
    let mut fields = 0;
    for p in &files {
        let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
        if name.ends_with(".oss") {
            let f = read_field(p).with_context(|| format!("invalid field file {}", p.display()))?;
            if &f.params != spec.params() || f.grid != cfg.grid {
                bail!("{}: field does not match the run configuration", p.display());
            }
            fields += 1;
        } else if name.starts_with("summary_") && name.ends_with(".csv") {
            for mut v in read_summary(p, &manifest.config_hash)? {
                if let Some(t) = tg.get(&v.quantity) {
                    v.target = *t;
                }
                v.recheck();
                verdicts.push(v);
            }
        }
    }
    Ok(RunSummary { dir: dir.to_path_buf(), manifest, fields, verdicts })
}

/// Walks `dir` for run directories and summarizes them.
pub fn report(dir: &Path) -> Result<Summary> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let mut dirs = Vec::new();
    find_runs(dir, &mut dirs)?;
    let mut runs = Vec::new();
    for d in dirs {
        let m = read_manifest(&d)?;
        if m.tool != TOOL || m.version != VERSION {
            bail!("{} was written by {} {}; this is {TOOL} {VERSION}, refusing to mix versions", d.display(), m.tool, m.version);
        }
        runs.push(summarize(&d)?);
    }
    runs.sort_by(|a, b| a.manifest.config_hash.cmp(&b.manifest.config_hash).then(a.dir.cmp(&b.dir)));
    Ok(Summary { runs })
}
