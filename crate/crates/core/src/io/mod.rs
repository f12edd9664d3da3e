//! File formats: matrix CSV, flat key-value configs, result records, run
//! manifests and SVG scatter plots. Every write goes to a temporary file in the
//! target directory that is renamed into place.

pub mod config;
pub mod manifest;
pub mod matrix;
pub mod plot;
pub mod records;

use std::io::Write;
use std::path::Path;

use crate::error::Result;

pub use config::FlatConfig;
pub use manifest::RunManifest;
pub use matrix::{read_matrix, write_matrix};
pub use plot::{emit_scatter_svg, PlotField, PlotSummary};
pub use records::{read_records, write_records};

/// Writes `bytes` to `path` through a temporary sibling and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
