// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use cpdkit::fsutil::write_atomic;

/// An output directory whose files may only be replaced under `--force`.
pub struct OutDir {
    root: PathBuf,
    force: bool,
}

impl OutDir {
    /// Creates `root` if needed and checks up front that none of `files`
    /// (relative to `root`) would be overwritten without `force`.
    pub fn prepare(root: &Path, force: bool, files: &[&str]) -> anyhow::Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let out = Self {
            root: root.to_path_buf(),
            force,
        };
        if !force {
            if let Some(f) = files.iter().map(|f| out.path(f)).find(|p| p.exists()) {
                bail!("{} already exists (pass --force to overwrite)", f.display());
            }
        }
        Ok(out)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn subdir(&self, name: &str, files: &[&str]) -> anyhow::Result<Self> {
        Self::prepare(&self.path(name), self.force, files)
    }

    pub fn write(&self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let p = self.path(name);
        if !self.force && p.exists() {
            bail!("{} already exists (pass --force to overwrite)", p.display());
        }
        write_atomic(&p, bytes.as_ref()).with_context(|| format!("writing {}", p.display()))?;
        Ok(p)
    }
}
