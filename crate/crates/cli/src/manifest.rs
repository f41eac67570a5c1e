use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use eulerian_sparsify::Error;

pub const MANIFEST_SCHEMA: &str = "eulerian-sparsify/manifest/v1";
pub const ERROR_SCHEMA: &str = "eulerian-sparsify/error/v1";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub schema: &'static str,
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub input_digest: Option<String>,
    pub output_digest: Option<String>,
    pub wall_time_s: f64,
    pub report_path: Option<PathBuf>,
}

/// A command failure: a library error or a CLI-level problem.
#[derive(Debug)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError { kind: "Usage", message: msg.into() }
    }

    pub fn to_json(&self) -> Value {
        json!({ "schema": ERROR_SCHEMA, "error": self.kind, "message": self.message })
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { kind: e.kind(), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::from(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn read(path: &Path) -> CliResult<(String, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::from(Error::Io(format!("{}: {e}", path.display()))))?;
    let d = digest(text.as_bytes());
    Ok((text, d))
}

/// Collects what a run needs for its manifest.
pub struct Run {
    command: &'static str,
    config: Value,
    seed: Option<u64>,
    inputs: Vec<String>,
    start: Instant,
}

impl Run {
    pub fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        Run { command, config, seed, inputs: Vec::new(), start: Instant::now() }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<String> {
        let (text, d) = read(path)?;
        self.inputs.push(d);
        Ok(text)
    }

    /// Writes `output` (if any), then the report with the manifest attached,
    /// and prints the manifest.
    pub fn finish(self, output: Option<(&Path, &[u8])>, report: Option<&Path>, body: Value) -> CliResult<()> {
        let output_digest = match output {
            Some((path, bytes)) => {
                std::fs::write(path, bytes)?;
                Some(digest(bytes))
            }
            None => None,
        };
        let input_digest = match self.inputs.len() {
            0 => None,
            1 => Some(self.inputs[0].clone()),
            _ => Some(digest(self.inputs.join("").as_bytes())),
        };
        let manifest = RunManifest {
            schema: MANIFEST_SCHEMA,
            command: self.command.to_string(),
            config: self.config,
            seed: self.seed,
            input_digest,
            output_digest,
            wall_time_s: self.start.elapsed().as_secs_f64(),
            report_path: report.map(Path::to_path_buf),
        };
        let manifest = serde_json::to_value(&manifest).expect("manifest serializes");
        if let Some(path) = report {
            let doc = json!({ "manifest": manifest, "report": body });
            std::fs::write(path, serde_json::to_string_pretty(&doc).expect("json") + "\n")?;
        }
        println!("{manifest}");
        Ok(())
    }
}
