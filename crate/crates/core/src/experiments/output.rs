//! Output files named `<stem>_<config hash>.<ext>` under the configured
//! directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use crate::error::Result;

use super::ExperimentConfig;

pub fn out_path(cfg: &ExperimentConfig, stem: &str, ext: &str) -> PathBuf {
    cfg.out.join(format!("{stem}_{}.{ext}", cfg.hash()))
}

/// Creates the output directory and writes one file through `body`.
pub fn emit<F>(cfg: &ExperimentConfig, stem: &str, ext: &str, body: F) -> Result<PathBuf>
where
    F: FnOnce(&mut dyn Write) -> std::io::Result<()>,
{
    std::fs::create_dir_all(&cfg.out)?;
    let path = out_path(cfg, stem, ext);
    let mut w = BufWriter::new(File::create(&path)?);
    body(&mut w)?;
    w.flush()?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

/// Records the canonical configuration next to the outputs it produced.
pub fn emit_manifest(cfg: &ExperimentConfig) -> Result<PathBuf> {
    emit(cfg, "config", "txt", |w| w.write_all(cfg.canonical().as_bytes()))
}
