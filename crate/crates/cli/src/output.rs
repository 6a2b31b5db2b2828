//! Output files: overwrite protection, CSV tables and metadata sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use crate::config::{ExperimentConfig, SCHEMA_VERSION};

/// Refuses to touch an existing output unless forced.
pub fn check_writable(path: &Path, force: bool) -> Result<()> {
    for p in [path.to_path_buf(), meta_path(path)] {
        if p.exists() && !force {
            bail!("refusing to overwrite {} (pass --force)", p.display());
        }
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn meta_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    path.with_file_name(name)
}

#[derive(Debug, Serialize)]
pub struct Meta<'a> {
    pub schema_version: u32,
    pub command: &'static str,
    pub config_hash: &'a str,
    pub seeds: &'a [u64],
    pub config: &'a ExperimentConfig,
}

pub fn write_meta(path: &Path, config: &ExperimentConfig, hash: &str) -> Result<()> {
    let meta = Meta {
        schema_version: SCHEMA_VERSION,
        command: config.experiment.name(),
        config_hash: hash,
        seeds: &config.seeds,
        config,
    };
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(meta_path(path), text).with_context(|| format!("writing metadata for {}", path.display()))
}

/// Header first, even with no rows, then one record per row.
pub fn csv_bytes<R: Serialize>(header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

pub fn write_csv<R: Serialize>(path: &Path, header: &[&str], rows: &[R]) -> Result<()> {
    fs::write(path, csv_bytes(header, rows)?).with_context(|| format!("writing {}", path.display()))
}
