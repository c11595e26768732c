//! `report.json` and the CSV artifacts, written only once a run has finished.

use std::io;
use std::path::{Path, PathBuf};

use hypdim::export::Table;
use hypdim::pipeline::GateFailure;
use serde::Serialize;
use serde_json::Value;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    GateFailure,
    NumericFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::NumericFailure => 1,
            Status::GateFailure => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub tool: &'static str,
    pub version: &'static str,
    pub pipeline: &'static str,
    pub seed: u64,
    pub status: Status,
    pub exit_code: i32,
    pub map: Option<Value>,
    pub family: Option<Value>,
    /// Headline dimension estimate, when the pipeline produces one.
    pub h: Option<f64>,
    pub gates: Option<Value>,
    pub failures: Vec<GateFailure>,
    pub results: Value,
    pub error: Option<String>,
    pub artifacts: Vec<String>,
}

/// Files collected during a run, relative to the output directory.
#[derive(Default)]
pub struct Artifacts {
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn table(&mut self, rel: &str, t: &Table) {
        self.files.push((rel.to_string(), t.to_csv()));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    pub fn write_all(&self, out: &Path, report: &Report) -> io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(out)?;
        let mut written = Vec::new();
        for (rel, body) in &self.files {
            let path = out.join(rel);
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(&path, body)?;
            written.push(path);
        }
        let path = out.join("report.json");
        let mut text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
        text.push('\n');
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(written)
    }
}
