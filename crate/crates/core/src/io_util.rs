use std::fs;
use std::path::Path;

use crate::error::{Result, ScatterError};

/// Writes `bytes` to `path`, creating parent directories as needed.
pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| ScatterError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| ScatterError::io(path, e))
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| ScatterError::io(path, e))
}
