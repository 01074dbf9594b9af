//! Resolved run configuration and report-file helpers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use prosabx_core::abx::{Averaging, ContextMode};
use prosabx_core::features::FrameSpec;
use prosabx_core::Metric;
use serde::Serialize;
use serde_json::Value;

use crate::error::{CliError, Result};

/// Everything that determines a run's output. Embedded in every report file.
/// The worker count and output location do not affect results and are left
/// out of the serialized form, so reruns compare byte for byte.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunConfig {
    pub command: String,
    pub version: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contrasts: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub features: Option<PathBuf>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub context: Option<ContextMode>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub averaging: Option<Averaging>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_speakers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frame_spec: Option<FrameSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Subcommand-specific settings.
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub params: BTreeMap<String, Value>,
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn new(command: &str) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            workers: 1,
            ..Self::default()
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.params
            .insert(key.into(), serde_json::to_value(value).expect("serializable"));
    }

    fn one_line(&self) -> String {
        serde_json::to_string(self).expect("serializable")
    }
}

#[derive(Serialize)]
struct ReportFile<'a, T: Serialize> {
    run: &'a RunConfig,
    report: &'a T,
}

pub fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(CliError::io(dir))
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    std::fs::write(path, contents).map_err(CliError::io(path))
}

pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(CliError::io(path))
}

/// `{"run": ..., "report": ...}`, pretty-printed.
pub fn write_json_report<T: Serialize>(path: &Path, run: &RunConfig, report: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(&ReportFile { run, report }).expect("serializable");
    text.push('\n');
    write_file(path, &text)
}

/// CSV body preceded by a `# run: {...}` comment line.
pub fn write_csv_report(path: &Path, run: &RunConfig, csv: &str) -> Result<()> {
    write_file(path, &format!("# run: {}\n{csv}", run.one_line()))
}

pub fn require_exists(path: &Path, what: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!("{what} {} does not exist", path.display())))
    }
}
