//! Input loading, artifact emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use martin_core::free::FreeWalkSpec;
use martin_core::kernel::LatticeKernel;
use martin_core::Error;
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::GlobalOpts;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] Error),
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) => match e.class() {
                martin_core::ErrorClass::Domain => 1,
                martin_core::ErrorClass::Resource => 2,
            },
            CliError::Read { .. } | CliError::Write { .. } => 1,
            CliError::Usage(_) => 64,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub enum Artifact {
    Csv(String),
    Json(String),
}

impl Artifact {
    pub fn json<T: Serialize>(value: &T) -> Self {
        Artifact::Json(serde_json::to_string_pretty(value).expect("report serializes") + "\n")
    }
}

/// What a command prints and, with `--out`, writes.
pub struct Outcome {
    pub summary: String,
    pub artifact: Option<Artifact>,
}

impl Outcome {
    pub fn new(summary: impl Into<String>, artifact: Artifact) -> Self {
        Self { summary: summary.into(), artifact: Some(artifact) }
    }
}

#[derive(Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Parameters {
    args: Vec<String>,
    tol: Option<f64>,
    budget: Option<u64>,
    threads: usize,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    inputs: &'a [InputDigest],
    parameters: Parameters,
    seed: u64,
    artifacts: Vec<String>,
    wall_time_s: f64,
}

/// Per-invocation state: options plus digests of every input read.
pub struct Ctx {
    pub opts: GlobalOpts,
    command: String,
    args: Vec<String>,
    inputs: Vec<InputDigest>,
    started: Instant,
}

impl Ctx {
    pub fn new(opts: GlobalOpts, command: String, args: Vec<String>) -> Self {
        Self { opts, command, args, inputs: Vec::new(), started: Instant::now() }
    }

    pub fn read(&mut self, path: &Path) -> CliResult<String> {
        let bytes = fs::read(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })?;
        self.inputs.push(InputDigest { path: path.display().to_string(), sha256: hex(&Sha256::digest(&bytes)) });
        String::from_utf8(bytes).map_err(|e| Error::Schema(format!("{}: {e}", path.display())).into())
    }

    pub fn kernel(&mut self, path: &Path) -> CliResult<LatticeKernel> {
        let text = self.read(path)?;
        Ok(LatticeKernel::from_json(&text)?)
    }

    pub fn walk(&mut self, path: &Path) -> CliResult<FreeWalkSpec> {
        let text = self.read(path)?;
        Ok(FreeWalkSpec::from_json(&text)?)
    }

    /// Prints the summary, writes the artifact and its manifest.
    pub fn finish(self, outcome: Outcome) -> CliResult<()> {
        if !outcome.summary.is_empty() {
            println!("{}", outcome.summary.trim_end());
        }
        let (Some(out), Some(artifact)) = (self.opts.out.clone(), outcome.artifact) else {
            return Ok(());
        };
        let body = match artifact {
            Artifact::Csv(s) | Artifact::Json(s) => s,
        };
        write(&out, &body)?;
        let mut manifest_path = out.clone().into_os_string();
        manifest_path.push(".manifest.json");
        let manifest_path = PathBuf::from(manifest_path);
        let manifest = RunManifest {
            command: &self.command,
            inputs: &self.inputs,
            parameters: Parameters {
                args: self.args.clone(),
                tol: self.opts.tol,
                budget: self.opts.budget,
                threads: rayon::current_num_threads(),
            },
            seed: self.opts.seed,
            artifacts: vec![out.display().to_string()],
            wall_time_s: self.started.elapsed().as_secs_f64(),
        };
        write(&manifest_path, &(serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n"))
    }
}

fn write(path: &Path, body: &str) -> CliResult<()> {
    fs::write(path, body).map_err(|source| CliError::Write { path: path.to_path_buf(), source })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Short decimal form for summaries: 12 significant decimals, trailing
/// zeros removed; scientific outside `[1e-6, 1e9)`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let a = x.abs();
    if !(1e-6..1e9).contains(&a) {
        return format!("{x:.6e}");
    }
    let s = format!("{x:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

pub fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

pub fn ints(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// CSV with a header row; values keep full round-trip precision.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn finish(self) -> Artifact {
        Artifact::Csv(self.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn short_numbers() {
        assert_eq!(num(0.39999999999999997), "0.4");
        assert_eq!(num(-2.5), "-2.5");
        assert_eq!(num(1e-9), "1.000000e-9");
        assert_eq!(num(-0.0), "0");
        assert_eq!(num(-1e-13), "-1.000000e-13");
        assert_eq!(nums(&[1.0, 0.25]), "1,0.25");
    }
}
