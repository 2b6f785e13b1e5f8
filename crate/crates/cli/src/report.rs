use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

pub const TOOL: &str = "analyze";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

/// One JSON document per run. Keys come out sorted because `serde_json`
/// objects are B-tree maps.
#[derive(Debug, Serialize)]
pub struct Report {
    pub command: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub tolerances: BTreeMap<&'static str, f64>,
    pub results: BTreeMap<String, Value>,
    pub checks: BTreeMap<String, bool>,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Report {
    pub fn new(command: &'static str, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            tool: TOOL,
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config)?,
            tolerances: BTreeMap::new(),
            results: BTreeMap::new(),
            checks: BTreeMap::new(),
            status: Status::Pass,
            error: None,
        })
    }

    pub fn tolerance(&mut self, name: &'static str, value: f64) {
        self.tolerances.insert(name, value);
    }

    pub fn result(&mut self, name: impl Into<String>, value: impl Serialize) -> Result<()> {
        self.results.insert(name.into(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn check(&mut self, name: impl Into<String>, passed: bool) {
        self.checks.insert(name.into(), passed);
    }

    /// Records a library error as the run's outcome instead of aborting.
    pub fn fail_with(&mut self, err: impl std::fmt::Display) {
        self.error = Some(err.to_string());
    }

    pub fn finish(mut self) -> Self {
        self.status = if self.error.is_some() {
            Status::Error
        } else if self.checks.values().all(|&c| c) {
            Status::Pass
        } else {
            Status::Fail
        };
        self
    }

    pub fn write(&self, out: Option<&Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(&serde_json::to_value(self)?)?;
        text.push('\n');
        match out {
            Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
            None => {
                std::io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail | Status::Error => 2,
        }
    }
}
