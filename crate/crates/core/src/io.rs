//! File helpers shared by the command-line tools.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

/// Write `data` to `path` through a temporary file in the same directory
/// and an atomic rename, so a failed run never leaves partial output.
pub fn write_atomic(path: &Path, data: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(data)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read(path: &Path) -> io::Result<Vec<u8>> {
    fs::read(path)
}

/// Treebank name derived from a file name: everything before the first dot.
/// `data/opener_en.dev.json` becomes `opener_en`.
pub fn treebank_name(path: &Path) -> String {
    path.file_name()
        .and_then(|n| n.to_str())
        .map(|n| n.split('.').next().unwrap_or(n).to_string())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| "treebank".to_string())
}
