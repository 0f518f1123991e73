use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use metric_fractals::kameyama::Provenance;
use serde::Serialize;
use serde_json::{json, Value};

/// Everything needed to rerun a command. Contains no timestamps or absolute
/// paths, so equal runs give byte-identical manifests.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub inputs: Vec<String>,
    pub parameters: BTreeMap<String, Value>,
    pub backend: String,
    pub seed: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, backend: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            inputs: Vec::new(),
            parameters: BTreeMap::new(),
            backend: backend.into(),
            seed,
            outputs: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) -> &mut Self {
        self.parameters.insert(key.into(), serde_json::to_value(value).expect("serializable"));
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Ok,
    /// The input has no embedding of the requested kind.
    Refused,
    /// A verification check failed.
    Failed,
}

impl Status {
    pub fn code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Refused => 2,
            Status::Failed => 3,
        }
    }
}

/// Result of one command before it is written out.
pub struct Run {
    pub manifest: RunManifest,
    pub report: Value,
    /// Extra artifacts `(file name, contents)`.
    pub files: Vec<(String, String)>,
    pub status: Status,
    pub summary: String,
}

pub fn tagged(value: impl Serialize, provenance: Provenance) -> Value {
    json!({ "value": value, "provenance": provenance })
}

pub fn pretty(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

/// Writes `report.json`, `manifest.json` and the artifacts into `dir`.
pub fn write_run(run: &mut Run, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut outputs: Vec<String> = run.files.iter().map(|(n, _)| n.clone()).collect();
    outputs.push("report.json".into());
    outputs.sort();
    run.manifest.outputs = outputs;
    for (name, contents) in &run.files {
        fs::write(dir.join(name), contents).with_context(|| format!("writing {name}"))?;
    }
    fs::write(dir.join("report.json"), pretty(&run.report))?;
    fs::write(dir.join("manifest.json"), pretty(&run.manifest))?;
    Ok(())
}
