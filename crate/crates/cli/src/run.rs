//! Run directories, acceptance checks and the manifest.

use std::fs::{self, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::CliError;
use crate::output::{self, format_float, Table};

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";
pub const CHECKS: &str = "checks.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub requirement: String,
    pub passed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    CheckFailed,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub run_id: String,
    pub config_digest: String,
    pub seed: u64,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub status: Status,
    pub exit_code: i32,
    pub checks: Vec<Check>,
    pub outputs: Vec<String>,
    pub failure: Option<String>,
    /// The config as run, defaults included.
    pub config: Value,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// An open run directory. Files are created, never replaced.
pub struct Run {
    dir: PathBuf,
    run_id: String,
    command: String,
    seed: u64,
    digest: String,
    config: Value,
    started: String,
    outputs: Vec<String>,
    checks: Vec<Check>,
}

impl Run {
    /// Creates `<out>/<command>-<seed>-<digest prefix>`, adding a numeric
    /// suffix when that run id already exists.
    pub fn create(out: &Path, command: &str, seed: u64, config: Value) -> Result<Run, CliError> {
        let io = |path: &Path| {
            let path = path.to_path_buf();
            move |source| CliError::Io { path, source }
        };
        fs::create_dir_all(out).map_err(io(out))?;
        let digest = output::digest(&config);
        let base = format!("{command}-{seed}-{}", &digest[..12]);
        let mut run_id = base.clone();
        let mut n = 1;
        let dir = loop {
            let dir = out.join(&run_id);
            match fs::create_dir(&dir) {
                Ok(()) => break dir,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    n += 1;
                    run_id = format!("{base}-{n}");
                }
                Err(e) => return Err(io(&dir)(e)),
            }
        };
        let mut run = Run {
            dir,
            run_id,
            command: command.into(),
            seed,
            digest,
            config,
            started: now(),
            outputs: Vec::new(),
            checks: Vec::new(),
        };
        let bytes = output::json_bytes(&run.config)?;
        run.write(CONFIG, &bytes)?;
        Ok(run)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        let mut f = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|source| CliError::Io { path: path.clone(), source })?;
        f.write_all(bytes).map_err(|source| CliError::Io { path, source })?;
        self.outputs.push(name.into());
        Ok(())
    }

    pub fn csv(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write(name, &table.to_bytes())
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let bytes = output::json_bytes(value)?;
        self.write(name, &bytes)
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, requirement: impl Into<String>, passed: bool) {
        self.checks.push(Check { name: name.into(), value, requirement: requirement.into(), passed });
    }

    pub fn at_most(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.check(name, value, format!("<= {}", format_float(limit)), value <= limit);
    }

    pub fn at_least(&mut self, name: impl Into<String>, value: f64, limit: f64) {
        self.check(name, value, format!(">= {}", format_float(limit)), value >= limit);
    }

    pub fn within(&mut self, name: impl Into<String>, value: f64, range: (f64, f64)) {
        let req = format!("in [{}, {}]", format_float(range.0), format_float(range.1));
        self.check(name, value, req, range.0 <= value && value <= range.1);
    }

    /// Boolean check; the value column holds 1 or 0.
    pub fn holds(&mut self, name: impl Into<String>, ok: bool) {
        self.check(name, if ok { 1.0 } else { 0.0 }, "true", ok);
    }

    /// Writes the check table and the manifest. A failed body is recorded
    /// with its error; everything written before it stays in place.
    pub fn finish(mut self, result: Result<(), CliError>) -> Result<Outcome, CliError> {
        let mut table = Table::new(&["name", "value", "requirement", "passed"]);
        for c in &self.checks {
            table.push([
                ("name", c.name.as_str().into()),
                ("value", c.value.into()),
                ("requirement", c.requirement.as_str().into()),
                ("passed", c.passed.into()),
            ]);
        }
        self.csv(CHECKS, &table)?;
        let (status, exit_code, failure) = match &result {
            Err(e) => (Status::Error, e.exit_code(), Some(e.to_string())),
            Ok(()) if self.checks.iter().all(|c| c.passed) => (Status::Pass, 0, None),
            Ok(()) => (Status::CheckFailed, 3, None),
        };
        let mut outputs = self.outputs.clone();
        outputs.push(MANIFEST.into());
        let manifest = RunManifest {
            command: self.command.clone(),
            run_id: self.run_id.clone(),
            config_digest: self.digest.clone(),
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").into(),
            started: self.started.clone(),
            finished: now(),
            status,
            exit_code,
            checks: self.checks.clone(),
            outputs,
            failure,
            config: self.config.clone(),
        };
        self.json(MANIFEST, &manifest)?;
        Ok(Outcome { dir: self.dir, manifest, error: result.err() })
    }
}

#[derive(Debug)]
pub struct Outcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub error: Option<CliError>,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.manifest.exit_code
    }

    pub fn passed(&self) -> bool {
        self.manifest.status == Status::Pass
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.manifest.checks.iter().find(|c| c.name == name)
    }
}
