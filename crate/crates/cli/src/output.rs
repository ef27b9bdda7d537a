//! Atomic file output and CSV formatting.

use std::io::Write;
use std::path::Path;

use crate::error::CliError;

/// Writes `contents` to `dir/name` through a temporary file in the same
/// directory, so readers never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

/// Shortest decimal that parses back to the same `f64`.
pub fn real(x: f64) -> String {
    format!("{x:?}")
}

/// Two-column `n,value` series.
pub fn series(header: &str, values: impl Iterator<Item = f64>) -> String {
    let mut out = format!("n,{header}\n");
    for (n, v) in values.enumerate() {
        out.push_str(&format!("{n},{}\n", real(v)));
    }
    out
}
