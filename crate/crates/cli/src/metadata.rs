use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;

/// One record per invocation, written to `<primary output>.run.json`.
#[derive(Debug, Serialize)]
pub struct RunMetadata {
    pub subcommand: &'static str,
    pub version: &'static str,
    pub config: Value,
    pub seeds: Value,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub results: Value,
    pub duration_secs: f64,
}

pub struct Run {
    subcommand: &'static str,
    started: Instant,
}

impl Run {
    pub fn start(subcommand: &'static str) -> Self {
        Run {
            subcommand,
            started: Instant::now(),
        }
    }

    pub fn finish(
        self,
        primary: &Path,
        config: impl Serialize,
        seeds: Value,
        inputs: &[&Path],
        outputs: &[&Path],
        results: Value,
    ) -> anyhow::Result<()> {
        let meta = RunMetadata {
            subcommand: self.subcommand,
            version: env!("CARGO_PKG_VERSION"),
            config: serde_json::to_value(config)?,
            seeds,
            inputs: inputs.iter().map(|p| p.to_path_buf()).collect(),
            outputs: outputs.iter().map(|p| p.to_path_buf()).collect(),
            results,
            duration_secs: self.started.elapsed().as_secs_f64(),
        };
        let path = sidecar_path(primary, "run.json");
        let text = serde_json::to_string_pretty(&meta)? + "\n";
        std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))
    }
}

/// `out.csv` -> `out.csv.<suffix>`.
pub fn sidecar_path(primary: &Path, suffix: &str) -> PathBuf {
    let mut s = primary.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}
