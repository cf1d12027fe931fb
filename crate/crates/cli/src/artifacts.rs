//! Output files and their manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    /// Sorted by path.
    pub artifacts: Vec<ManifestEntry>,
}

/// Writes artifacts into one directory. Unless [`ArtifactWriter::finish`] is
/// reached, every file written so far is removed on drop.
pub struct ArtifactWriter {
    dir: PathBuf,
    entries: Vec<ManifestEntry>,
    done: bool,
}

impl ArtifactWriter {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), entries: Vec::new(), done: false })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if self.entries.iter().any(|e| e.path == name) || name == MANIFEST {
            return Err(CliError::validation(format!("artifact `{name}` written twice")));
        }
        let path = self.dir.join(name);
        // recorded first so a partial write is cleaned up too
        self.entries.push(ManifestEntry {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        fs::write(&path, bytes).map_err(|e| CliError::io(path, e))?;
        log::debug!("wrote {name} ({} bytes)", bytes.len());
        Ok(())
    }

    /// Builds the artifact in memory with `f`, then writes it.
    pub fn write_with(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut Vec<u8>) -> Result<(), CliError>,
    ) -> Result<(), CliError> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write(name, &buf)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.path.as_str())
    }

    /// Writes the manifest last and keeps everything.
    pub fn finish(mut self) -> Result<Manifest, CliError> {
        let mut artifacts = self.entries.clone();
        artifacts.sort_by(|a, b| a.path.cmp(&b.path));
        let manifest = Manifest { artifacts };
        let mut json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        json.push(b'\n');
        let path = self.dir.join(MANIFEST);
        fs::write(&path, json).map_err(|e| CliError::io(path, e))?;
        self.done = true;
        Ok(manifest)
    }
}

impl Drop for ArtifactWriter {
    fn drop(&mut self) {
        if self.done {
            return;
        }
        for e in &self.entries {
            let path = self.dir.join(&e.path);
            if let Err(err) = fs::remove_file(&path) {
                if err.kind() != std::io::ErrorKind::NotFound {
                    log::warn!("could not remove partial artifact {}: {err}", path.display());
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_sorted_hashes() {
        let dir = tempfile::tempdir().unwrap();
        let mut w = ArtifactWriter::create(dir.path()).unwrap();
        w.write("b.csv", b"x\n").unwrap();
        w.write("a.csv", b"").unwrap();
        let m = w.finish().unwrap();
        let paths: Vec<_> = m.artifacts.iter().map(|e| e.path.as_str()).collect();
        assert_eq!(paths, ["a.csv", "b.csv"]);
        assert_eq!(m.artifacts[0].sha256, "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
        assert_eq!(m.artifacts[1].bytes, 2);
        assert!(dir.path().join(MANIFEST).is_file());
    }

    #[test]
    fn unfinished_writers_remove_their_files() {
        let dir = tempfile::tempdir().unwrap();
        {
            let mut w = ArtifactWriter::create(dir.path()).unwrap();
            w.write("a.csv", b"1").unwrap();
            assert!(w.write("a.csv", b"2").is_err());
        }
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
