//! Files of one run and the manifest that lists them.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use throwcatch::Result;

pub const MANIFEST: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmittedFile {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub experiment: String,
    /// sha256 of the echoed configuration below.
    pub config_sha256: String,
    pub seed: Option<u64>,
    pub timestamp: String,
    pub files: Vec<EmittedFile>,
    pub warnings: Vec<String>,
    /// The merged configuration document; it parses back to the same model.
    pub config: String,
}

/// Writes run outputs into a directory. Files are written under a temporary name and renamed once
/// complete; [`Emitter::abort`] removes everything the run has written.
#[derive(Debug)]
pub struct Emitter {
    dir: PathBuf,
    files: Vec<EmittedFile>,
}

impl Emitter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Emitter { dir: dir.to_path_buf(), files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn files(&self) -> &[EmittedFile] {
        &self.files
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        let partial = self.dir.join(format!("{name}.partial"));
        let done = fs::write(&partial, bytes).and_then(|_| fs::rename(&partial, &path));
        if let Err(e) = done {
            let _ = fs::remove_file(&partial);
            return Err(e.into());
        }
        log::debug!("wrote {}", path.display());
        self.files.push(EmittedFile { name: name.to_string(), sha256: sha256_hex(bytes), bytes: bytes.len() as u64 });
        Ok(())
    }

    pub fn abort(self) {
        for f in &self.files {
            let _ = fs::remove_file(self.dir.join(&f.name));
        }
    }

    /// Fills in the file list and writes the manifest after every other file.
    pub fn finish(self, mut manifest: RunManifest) -> Result<RunManifest> {
        manifest.files = self.files.clone();
        let text = serde_json::to_vec_pretty(&manifest)?;
        if let Err(e) = fs::write(self.dir.join(MANIFEST), text) {
            self.abort();
            return Err(e.into());
        }
        Ok(manifest)
    }
}
