use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use hytarget::data::io::write_atomic;
use hytarget::Error;

/// What a run read, wrote and with which seed. Written last, atomically.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    /// Input path → sha256.
    pub inputs: BTreeMap<String, String>,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub prior_source: Option<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Output file name → sha256.
    pub artifacts: BTreeMap<String, String>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

pub fn sha256_file(path: &Path) -> Result<String, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn start(command: &str, config: Option<&Path>, output_dir: &Path, seed: u64) -> Self {
        Self {
            command: command.into(),
            config: config.map(Path::to_path_buf),
            inputs: BTreeMap::new(),
            output_dir: output_dir.to_path_buf(),
            seed,
            prior_source: None,
            started_unix: now(),
            finished_unix: 0,
            artifacts: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), Error> {
        self.inputs.insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    pub fn artifact(&mut self, path: &Path) -> Result<(), Error> {
        let name = path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned());
        self.artifacts.insert(name, sha256_file(path)?);
        Ok(())
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(mut self, dir: &Path) -> Result<(), Error> {
        self.finished_unix = now();
        let json = serde_json::to_vec_pretty(&self).expect("manifest serializes");
        write_atomic(dir.join("manifest.json"), &json)
    }
}
