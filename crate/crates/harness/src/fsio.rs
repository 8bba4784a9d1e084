use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{HarnessError, Result};

static COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a sibling temp file and renames it over `path`, so
/// readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| HarnessError::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| HarnessError::artifact(path, "not a file path"))?
        .to_string_lossy();
    let tmp = path.with_file_name(format!(
        ".{name}.tmp-{}-{}",
        std::process::id(),
        COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    std::fs::write(&tmp, bytes).map_err(|e| HarnessError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        HarnessError::io(path, e)
    })
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| HarnessError::artifact(path, e.to_string()))
}
