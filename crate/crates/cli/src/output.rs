//! Output files are written to a temporary sibling and renamed into place,
//! so a failed command never leaves a partial file behind.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use tempfile::NamedTempFile;

/// Files staged next to their destinations, published together.
#[derive(Default)]
pub struct Staged {
    files: Vec<(NamedTempFile, PathBuf)>,
}

impl Staged {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, dest: &Path, contents: &[u8]) -> Result<()> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let mut tmp = NamedTempFile::new_in(dir).with_context(|| format!("cannot stage {}", dest.display()))?;
        tmp.write_all(contents).with_context(|| format!("cannot write {}", dest.display()))?;
        tmp.as_file().sync_all()?;
        self.files.push((tmp, dest.to_owned()));
        Ok(())
    }

    /// Renames every staged file into place.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.files.len());
        for (tmp, dest) in self.files {
            tmp.persist(&dest).with_context(|| format!("cannot write {}", dest.display()))?;
            done.push(dest);
        }
        Ok(done)
    }
}

pub fn write_atomic(dest: &Path, contents: &[u8]) -> Result<()> {
    let mut staged = Staged::new();
    staged.add(dest, contents)?;
    staged.commit()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dropped_stage_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("a.txt");
        {
            let mut s = Staged::new();
            s.add(&dest, b"x").unwrap();
        }
        assert!(!dest.exists());
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }

    #[test]
    fn commit_publishes() {
        let dir = tempfile::tempdir().unwrap();
        let dest = dir.path().join("a.txt");
        write_atomic(&dest, b"hello").unwrap();
        assert_eq!(std::fs::read(&dest).unwrap(), b"hello");
    }
}
