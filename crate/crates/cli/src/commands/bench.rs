use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use serde_json::json;
use spectral_collision::direct::DEFAULT_LOG_FLOOR;
use spectral_collision::initcond;
use spectral_collision::kernels::builtin;
use spectral_collision::solver::{step_euler, DirectEvaluator, FastEvaluator, RhsEvaluator};
use spectral_collision::VelocityGrid;

use super::Manifest;
use crate::config::{create_dir, write_json};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Grid sizes N0.
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    pub sizes: Vec<usize>,
    /// Built-in kernel name or kernel file.
    #[arg(long, default_value = "gaussian_ss")]
    pub kernel: String,
    #[arg(long, default_value_t = 3)]
    pub repetitions: usize,
    /// Largest N0 timed with the direct evaluator.
    #[arg(long, default_value_t = 16)]
    pub direct_cap: usize,
    /// Half-width L of the velocity box.
    #[arg(long, default_value_t = 8.0)]
    pub extent: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Row {
    #[serde(rename = "N0")]
    n0: usize,
    #[serde(rename = "N")]
    n: usize,
    t_direct: Option<f64>,
    t_fast: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    }
}

/// Median wall time of one forward-Euler step, after one warm-up step.
fn time_step(eval: &dyn RhsEvaluator, grid: &VelocityGrid, reps: usize) -> CliResult<f64> {
    let f = initcond::gmm(grid);
    let dt = 0.1 * grid.spacing() * grid.spacing();
    step_euler(&f, dt, eval)?;
    let mut ts = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        std::hint::black_box(step_euler(&f, dt, eval)?);
        ts.push(t.elapsed().as_secs_f64());
    }
    Ok(median(ts))
}

pub fn run(a: &BenchArgs) -> CliResult<()> {
    if a.sizes.is_empty() || a.repetitions == 0 {
        return Err(CliError::validation("need at least one size and one repetition"));
    }
    let started = Instant::now();
    let kernel = builtin::resolve(&a.kernel).map_err(|e| CliError::from(e).at("--kernel"))?;
    let grids = a
        .sizes
        .iter()
        .map(|&n| VelocityGrid::new(a.extent, n).map_err(|e| CliError::from(e).at("--sizes")))
        .collect::<CliResult<Vec<_>>>()?;
    create_dir(&a.out)?;
    let config = json!({
        "sizes": a.sizes, "kernel": a.kernel, "repetitions": a.repetitions,
        "direct_cap": a.direct_cap, "extent": a.extent,
    });
    let manifest = Manifest::new("bench", config, json!({ "f_min": DEFAULT_LOG_FLOOR }));
    let mut notes = Vec::new();
    let result = (|| {
        let mut rows = Vec::new();
        for g in &grids {
            let t_direct = if g.n0() <= a.direct_cap {
                Some(time_step(&DirectEvaluator::new(Arc::clone(&kernel), DEFAULT_LOG_FLOOR), g, a.repetitions)?)
            } else {
                notes.push(format!("direct evaluator skipped at N0 = {} (cap {})", g.n0(), a.direct_cap));
                None
            };
            let t_fast = match kernel.as_ss() {
                Some(ss) => Some(time_step(&FastEvaluator::new(g, ss, DEFAULT_LOG_FLOOR)?, g, a.repetitions)?),
                None => {
                    notes.push(format!("fast evaluator skipped at N0 = {}: kernel is not separable", g.n0()));
                    None
                }
            };
            rows.push(Row { n0: g.n0(), n: g.len(), t_direct, t_fast });
        }
        let mut w = csv::Writer::from_path(a.out.join("timing.csv"))?;
        for r in &rows {
            w.serialize(r)?;
        }
        w.flush()?;
        for n in &notes {
            eprintln!("note: {n}");
        }
        write_json(&a.out.join("bench.json"), &json!({ "rows": rows, "notes": notes }))
    })();
    manifest.finish(&a.out, started, result)
}
