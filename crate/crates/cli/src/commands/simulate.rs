use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use spectral_collision::grid::write_snapshot;
use spectral_collision::solver::{make_evaluator, run_with, write_diagnostics_csv, EvaluatorKind, Trajectory};

use super::{to_value, Manifest};
use crate::config::{create_dir, load, GridSection, InitRef, KernelRef, RunSection};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnapshotFormat {
    #[default]
    Csv,
    F64,
}

impl SnapshotFormat {
    fn ext(self) -> &'static str {
        match self {
            SnapshotFormat::Csv => "csv",
            SnapshotFormat::F64 => "f64",
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateConfig {
    grid: GridSection,
    kernel: KernelRef,
    init: InitRef,
    run: RunSection,
    #[serde(default)]
    snapshot_format: SnapshotFormat,
}

pub fn run(config: &Path, out: &Path, evaluator: Option<EvaluatorKind>) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load::<SimulateConfig>(config)?;
    let c = &cfg.value;
    let grid = c.grid.build()?;
    let kernel = c.kernel.resolve(&cfg.base, "kernel")?;
    let init = c.init.condition()?;
    let f0 = init.build(&grid).map_err(|e| CliError::from(e).at("init"))?;
    let run_cfg = c.run.to_run_config(c.kernel.reference(&cfg.base), evaluator)?;
    let eval = make_evaluator(run_cfg.evaluator, kernel, &grid, run_cfg.f_min).map_err(|e| CliError::from(e).at("kernel"))?;
    create_dir(out)?;

    let resolved = json!({ "init": to_value(&init)?, "run": to_value(&run_cfg)?, "dt": run_cfg.dt(&grid) });
    let manifest = Manifest::new("simulate", cfg.raw.clone(), resolved);
    let result = match run_with(&f0, &run_cfg, eval.as_ref(), |_| {}) {
        Ok(traj) => write_outputs(out, &traj, &run_cfg.snapshots, c.snapshot_format),
        Err(failure) => {
            // keep what was computed before the failure
            let partial = Trajectory { final_state: failure.last_state.clone(), ..failure.partial.clone() };
            write_outputs(out, &partial, &[], c.snapshot_format)?;
            Err(CliError::from(failure.error))
        }
    };
    manifest.finish(out, started, result)
}

/// Diagnostics plus the requested snapshots, or the last state when none were requested.
fn write_outputs(out: &Path, traj: &Trajectory, requested: &[f64], format: SnapshotFormat) -> CliResult<()> {
    write_diagnostics_csv(&out.join("diagnostics.csv"), &traj.records)?;
    let last_time = traj.records.last().map_or(0.0, |r| r.time);
    let picked: Vec<(f64, &spectral_collision::ScalarField)> = if requested.is_empty() {
        vec![(last_time, &traj.final_state)]
    } else {
        requested.iter().filter_map(|&t| traj.snapshot_at(t).map(|f| (t, f))).collect()
    };
    let mut index = std::fs::File::create(out.join("snapshots.txt"))?;
    for (t, f) in picked {
        let name = format!("snapshot_t{t:.6}.{}", format.ext());
        write_snapshot(&out.join(&name), f, t)?;
        writeln!(index, "{t} {name}")?;
    }
    Ok(())
}
