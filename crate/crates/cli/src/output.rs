use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::CliError;

/// Writes `contents` to a temporary file beside `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)
        .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| CliError::Internal(format!("cannot write {}: {}", path.display(), e.error)))?;
    Ok(())
}

pub fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Parse {
        path: path.display().to_string(),
        message: format!("cannot read file: {e}"),
    })
}

pub fn step_label(h: f64) -> String {
    format!("h{h}")
}

pub fn tmatrix_path(dir: &Path, sym: &str, h: f64) -> PathBuf {
    dir.join(format!("tmatrix_{sym}_{}.csv", step_label(h)))
}

pub fn amplitudes_path(dir: &Path, sym: &str, h: f64) -> PathBuf {
    dir.join(format!("amplitudes_{sym}_{}.csv", step_label(h)))
}

pub fn coupling_path(dir: &Path, sym: &str) -> PathBuf {
    dir.join(format!("coupling_{sym}.csv"))
}

pub fn corrected_path(dir: &Path, sym: &str) -> PathBuf {
    dir.join(format!("corrected_{sym}.csv"))
}

pub fn sdcs_path(dir: &Path, sym: &str, tag: &str) -> PathBuf {
    dir.join(format!("sdcs_{sym}_{tag}.csv"))
}
