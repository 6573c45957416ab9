use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::args::Cli;

/// Record of one run: re-running its command line reproduces outputs with
/// the same digests.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub threads: usize,
    pub library_version: String,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub elapsed_secs: f64,
}

/// Collects the files a command reads and writes.
pub struct Recorder {
    started: Instant,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
}

impl Recorder {
    pub fn new() -> Self {
        Recorder { started: Instant::now(), inputs: Vec::new(), outputs: Vec::new() }
    }

    pub fn input(&mut self, p: &Path) -> PathBuf {
        self.inputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    pub fn output(&mut self, p: &Path) -> PathBuf {
        self.outputs.push(p.to_path_buf());
        p.to_path_buf()
    }

    pub fn write(self, cli: &Cli, argv: &[String], path: &Path) -> epsapprox::Result<()> {
        let digests = |files: &[PathBuf]| -> epsapprox::Result<BTreeMap<String, String>> {
            files.iter().map(|f| Ok((f.display().to_string(), digest(f)?))).collect()
        };
        let manifest = RunManifest {
            command_line: argv.to_vec(),
            config: serde_json::to_value(&cli.command)?,
            seed: cli.seed,
            threads: cli.threads,
            library_version: epsapprox::VERSION.to_string(),
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            elapsed_secs: self.started.elapsed().as_secs_f64(),
        };
        epsapprox::io::write_json(path, &manifest)
    }
}

pub fn digest(path: &Path) -> epsapprox::Result<String> {
    let bytes = fs::read(path)?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

/// `<path>.<suffix>`, keeping the full original file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".");
    name.push(suffix);
    path.with_file_name(name)
}
