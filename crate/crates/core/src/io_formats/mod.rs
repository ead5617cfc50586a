//! Persistence: grayscale/RGB images, the profile JSON document, and CSV/SVG
//! curve exports.
//!
//! Every writer goes through [`write_atomic`], which writes a sibling temp
//! file and renames it over the target.

mod curves;
mod image_io;
mod profile_doc;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use tempfile::NamedTempFile;

use crate::error::{Error, Result};

pub use curves::{
    curve_csv, curve_svg, ground_truth_csv, modulation_csv, ridge_csv, svg_plot, write_text,
    PlotSeries,
};
pub use image_io::{load_image, quantize, save_image, BitDepth, Image, ImageFormat};
pub use profile_doc::{
    load_profile, profile_from_json, profile_to_json, read_profile_document, save_profile, Dims,
    ProfileDocument, PROFILE_VERSION,
};

/// Writes `path` via a temporary file in the same directory and an atomic rename.
pub fn write_atomic(path: &Path, write: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut w = BufWriter::new(tmp.as_file_mut());
        write(&mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        fs::set_permissions(tmp.path(), fs::Permissions::from_mode(0o644))
            .map_err(|e| Error::io(tmp.path(), e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}
