//! Reproducibility manifest written next to every run's artifacts.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use duoring_core::io::write_json_file;
use duoring_core::Result;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

#[derive(Debug, Serialize)]
struct Artifact {
    file: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    tolerance: Option<f64>,
    /// SHA-256 of the normalized configuration.
    config_sha256: String,
    config: &'a serde_json::Value,
    arguments: &'a [String],
    artifacts: Vec<Artifact>,
}

/// Collects the files written by one run.
pub struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf(), files: Vec::new() }
    }

    /// Writes one artifact through `f`.
    pub fn write<F>(&mut self, name: &str, f: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> Result<()>,
    {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        f(&mut w)?;
        std::io::Write::flush(&mut w)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        write_json_file(&self.dir.join(name), value)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn finish(
        self,
        command: &str,
        seed: u64,
        tolerance: Option<f64>,
        config: &serde_json::Value,
        arguments: &[String],
    ) -> Result<()> {
        let mut artifacts = Vec::with_capacity(self.files.len());
        for f in &self.files {
            let data = std::fs::read(self.dir.join(f))?;
            artifacts.push(Artifact { file: f.clone(), sha256: sha256_hex(&data) });
        }
        let canonical = serde_json::to_vec(config)?;
        let m = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            tolerance,
            config_sha256: sha256_hex(&canonical),
            config,
            arguments,
            artifacts,
        };
        write_json_file(&self.dir.join("manifest.json"), &m)
    }
}
