use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

/// One tolerance test of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured <= tolerance`.
    pub fn at_most(name: &str, measured: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub artifact: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub diagnostics: Map<String, Value>,
    pub checks: Vec<Check>,
    pub timings_ms: Map<String, Value>,
    pub exit_code: i32,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        RunManifest {
            artifact: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config: config.clone(),
            diagnostics: Map::new(),
            checks: Vec::new(),
            timings_ms: Map::new(),
            exit_code: 0,
        }
    }

    pub fn diag(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).unwrap_or(Value::Null);
        self.diagnostics.insert(key.into(), v);
    }

    pub fn time(&mut self, key: &str, ms: f64) {
        self.timings_ms.insert(key.into(), Value::from(ms));
    }

    pub fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Write `manifest.json` via a temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let tmp = dir.join("manifest.json.tmp");
        {
            let mut f = fs::File::create(&tmp)?;
            serde_json::to_writer_pretty(&mut f, self)?;
            f.write_all(b"\n")?;
            f.sync_all()?;
        }
        fs::rename(&tmp, dir.join("manifest.json"))?;
        Ok(())
    }
}
