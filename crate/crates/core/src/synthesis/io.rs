//! `OSS1` field dumps: a binary value file plus a JSON sidecar with spec, grid, method and seed.
//!
//! Layout (little-endian): `b"OSS1"`, version `u8`, `d: u32`, `m: u32`, block dims `m x u32`,
//! grid counts `d x u64`, then `prod(counts)` values as `f64`.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{FieldRealization, GridSpec, Method, SynthParams};
use crate::error::{Error, Result};
use crate::scale::SheetParams;

pub const MAGIC: &[u8; 4] = b"OSS1";
pub const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub format: String,
    pub params: SheetParams,
    pub grid: GridSpec,
    pub seed: u64,
    pub method: Method,
    pub synth: SynthParams,
    /// Free-form provenance, such as a configuration hash.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, String>,
}

/// `field.oss` -> `field.oss.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write_field(path: &Path, field: &FieldRealization) -> Result<()> {
    write_field_labeled(path, field, &BTreeMap::new())
}

pub fn write_field_labeled(path: &Path, field: &FieldRealization, labels: &BTreeMap<String, String>) -> Result<()> {
    let dims = field.params.layout.dims();
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&[VERSION])?;
    w.write_all(&(field.grid.d() as u32).to_le_bytes())?;
    w.write_all(&(dims.len() as u32).to_le_bytes())?;
    for d in &dims {
        w.write_all(&(*d as u32).to_le_bytes())?;
    }
    for n in &field.grid.counts {
        w.write_all(&(*n as u64).to_le_bytes())?;
    }
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    let meta = FieldMeta {
        format: "OSS1".into(),
        params: field.params.clone(),
        grid: field.grid.clone(),
        seed: field.seed,
        method: field.method,
        synth: field.synth.clone(),
        labels: labels.clone(),
    };
    let text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(sidecar_path(path), text + "\n")?;
    Ok(())
}

fn take<const N: usize>(buf: &[u8], at: &mut usize) -> Result<[u8; N]> {
    let s = buf.get(*at..*at + N).ok_or_else(|| Error::Io("truncated OSS1 file".into()))?;
    *at += N;
    Ok(s.try_into().unwrap())
}

/// The JSON sidecar of `path`.
pub fn read_meta(path: &Path) -> Result<FieldMeta> {
    let text = fs::read_to_string(sidecar_path(path))?;
    serde_json::from_str(&text).map_err(|e| Error::Io(format!("{}: {e}", sidecar_path(path).display())))
}

/// Reads a dump and its sidecar; errors name the file.
pub fn read_field(path: &Path) -> Result<FieldRealization> {
    read_field_inner(path).map_err(|e| match e {
        Error::Io(m) if !m.starts_with(&path.display().to_string()) => Error::Io(format!("{}: {m}", path.display())),
        other => other,
    })
}

fn read_field_inner(path: &Path) -> Result<FieldRealization> {
    let mut buf = Vec::new();
    fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut at = 0;
    if &take::<4>(&buf, &mut at)? != MAGIC {
        return Err(Error::Io("not an OSS1 file".into()));
    }
    let ver = take::<1>(&buf, &mut at)?[0];
    if ver != VERSION {
        return Err(Error::Io(format!("unsupported OSS1 version {ver}")));
    }
    let d = u32::from_le_bytes(take(&buf, &mut at)?) as usize;
    let m = u32::from_le_bytes(take(&buf, &mut at)?) as usize;
    let dims = (0..m).map(|_| Ok(u32::from_le_bytes(take(&buf, &mut at)?) as usize)).collect::<Result<Vec<_>>>()?;
    let counts = (0..d).map(|_| Ok(u64::from_le_bytes(take(&buf, &mut at)?) as usize)).collect::<Result<Vec<_>>>()?;
    let n: usize = counts.iter().product();
    if buf.len() != at + 8 * n {
        return Err(Error::Io(format!("expected {n} values, file holds {} bytes of data", buf.len() - at)));
    }
    let values = buf[at..].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    let meta = read_meta(path)?;
    if meta.grid.counts != counts || meta.params.layout.dims() != dims {
        return Err(Error::Io("sidecar does not match the OSS1 header".into()));
    }
    Ok(FieldRealization {
        params: meta.params,
        grid: meta.grid,
        values,
        seed: meta.seed,
        method: meta.method,
        synth: meta.synth,
        tail_indicator: None,
    })
}
