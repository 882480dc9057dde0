use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Output directory collecting the artifacts written by one subcommand.
pub struct OutDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

impl OutDir {
    pub fn create(root: PathBuf) -> CliResult<Self> {
        fs::create_dir_all(&root).map_err(|e| CliError::io(&root, e))?;
        Ok(Self { root, written: vec![] })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Writes a delimited table; `fill` receives the writer after the header row.
    pub fn table<F>(&mut self, name: &str, header: &[&str], fill: F) -> CliResult<PathBuf>
    where
        F: FnOnce(&mut csv::Writer<Vec<u8>>) -> CliResult<()>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        fill(&mut w)?;
        let bytes = w.into_inner().map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.bytes(name, &bytes)
    }

    pub fn bytes(&mut self, name: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        if !self.written.contains(&path) {
            self.written.push(path.clone());
        }
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> CliResult<PathBuf> {
        let text = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(format!("{name}: {e}")))?;
        self.bytes(name, &text)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// Records config, seed and a SHA-256 checksum of every artifact.
    pub fn write_manifest(&mut self, command: &str, config: &RunConfig) -> CliResult<PathBuf> {
        let mut artifacts = self
            .written
            .iter()
            .map(|p| {
                let bytes = fs::read(p).map_err(|e| CliError::io(p, e))?;
                Ok(Artifact {
                    file: p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default(),
                    bytes: bytes.len(),
                    sha256: hex(&Sha256::digest(&bytes)),
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        artifacts.sort_by(|a, b| a.file.cmp(&b.file));
        let manifest = Manifest { command, version: env!("CARGO_PKG_VERSION"), seed: config.seed, config, artifacts };
        let path = self.path(MANIFEST);
        let mut text = serde_json::to_vec_pretty(&manifest).map_err(|e| CliError::Io(e.to_string()))?;
        text.push(b'\n');
        let mut f = fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
        f.write_all(&text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    config: &'a RunConfig,
    artifacts: Vec<Artifact>,
}

#[derive(Serialize)]
struct Artifact {
    file: String,
    bytes: usize,
    sha256: String,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}

pub fn lib_csv_err(e: sysrisk::Error) -> CliError {
    CliError::Io(e.to_string())
}

/// Shortest round-trip representation, in exponent form for very small or large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// `NA` for missing values.
pub fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}
