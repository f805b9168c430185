pub mod bench;
pub mod compare;
pub mod convergence;
pub mod diagnose;
pub mod fit;
pub mod simulate;

use std::path::Path;
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::write_json;
use crate::error::{CliError, CliResult};

#[derive(Debug, Serialize)]
struct Versions {
    sscoll: &'static str,
    spectral_collision: &'static str,
}

/// Everything needed to rerun a command: the config as given, what it
/// resolved to, versions and timing.
#[derive(Debug, Serialize)]
pub struct Manifest {
    command: &'static str,
    config: Value,
    resolved: Value,
    versions: Versions,
    threads: usize,
    wall_clock_seconds: f64,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

impl Manifest {
    pub fn new(command: &'static str, config: Value, resolved: Value) -> Self {
        Self {
            command,
            config,
            resolved,
            versions: Versions { sscoll: env!("CARGO_PKG_VERSION"), spectral_collision: spectral_collision::VERSION },
            threads: rayon::current_num_threads(),
            wall_clock_seconds: 0.0,
            status: "ok",
            error: None,
        }
    }

    /// Writes `manifest.json` with the outcome and passes the result through.
    pub fn finish(mut self, dir: &Path, started: Instant, result: CliResult<()>) -> CliResult<()> {
        self.wall_clock_seconds = started.elapsed().as_secs_f64();
        if let Err(e) = &result {
            self.status = "failed";
            self.error = Some(e.message.clone());
        }
        let written = write_json(&dir.join("manifest.json"), &self);
        result.and(written)
    }
}

pub fn to_value(v: &impl Serialize) -> CliResult<Value> {
    serde_json::to_value(v).map_err(|e| CliError::validation(e.to_string()))
}
