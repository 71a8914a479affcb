// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

/// `<path>.partial`, where output is staged until it is complete.
pub fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".partial");
    name.into()
}

/// Writes `bytes` to `<path>.partial`, then renames it to `path`.
///
/// A crash leaves at most a `.partial` file behind, never a truncated `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let partial = partial_path(path);
    let mut f = fs::File::create(&partial)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&partial, path)
}
