use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use spectral_collision::direct::{collision_flux_direct, collision_rhs_direct, DEFAULT_LOG_FLOOR};
use spectral_collision::fast::{collision_flux_fast, collision_rhs_fast, ConvolutionPlan, TermTable};
use spectral_collision::{Error, Vector3};

use super::Manifest;
use crate::config::{create_dir, load, write_json, GridSection, InitRef, KernelRef};
use crate::error::{CliError, CliResult};

pub const DEFAULT_THRESHOLD: f64 = 1e-9;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareConfig {
    grid: GridSection,
    kernel: KernelRef,
    init: InitRef,
    #[serde(default)]
    f_min: Option<f64>,
}

/// Absolute and relative discrepancies of one quantity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Difference {
    pub max_abs: f64,
    pub reference_max: f64,
    pub rel_linf: f64,
}

impl Difference {
    fn of(diffs: impl Iterator<Item = f64>, refs: impl Iterator<Item = f64>) -> Self {
        let max_abs = diffs.fold(0.0, f64::max);
        let reference_max = refs.fold(0.0, f64::max);
        let rel_linf = if reference_max > 0.0 { max_abs / reference_max } else { max_abs };
        Self { max_abs, reference_max, rel_linf }
    }
}

#[derive(Debug, Serialize)]
struct Report {
    kernel: String,
    n0: usize,
    flux: Difference,
    rhs: Difference,
    threshold: f64,
    passed: bool,
}

pub fn run(config: &Path, out: &Path, threshold: f64) -> CliResult<()> {
    if !(threshold >= 0.0) {
        return Err(CliError::validation("--threshold must be non-negative"));
    }
    let started = Instant::now();
    let cfg = load::<CompareConfig>(config)?;
    let c = &cfg.value;
    let grid = c.grid.build()?;
    let kernel = c.kernel.resolve(&cfg.base, "kernel")?;
    let ss = kernel
        .as_ss()
        .ok_or_else(|| CliError::from(Error::DirectOnly(kernel.name().to_string())).at("kernel"))?;
    let f = c.init.condition()?.build(&grid).map_err(|e| CliError::from(e).at("init"))?;
    let f_min = c.f_min.unwrap_or(DEFAULT_LOG_FLOOR);
    create_dir(out)?;
    let manifest = Manifest::new("compare", cfg.raw.clone(), json!({ "f_min": f_min, "threshold": threshold }));

    let result = (|| {
        let plan = ConvolutionPlan::new(&grid, ss, &TermTable::build()?)?;
        let (jd, jf) = (collision_flux_direct(&f, kernel.as_ref(), f_min), collision_flux_fast(&f, &plan, f_min)?);
        let (qd, qf) = (collision_rhs_direct(&f, kernel.as_ref(), f_min), collision_rhs_fast(&f, &plan, f_min)?);
        let norm = |v: &Vector3<f64>| v.amax();
        let flux = Difference::of(
            jd.values().iter().zip(jf.values()).map(|(a, b)| norm(&(a - b))),
            jd.values().iter().map(norm),
        );
        let rhs = Difference::of(
            qd.values().iter().zip(qf.values()).map(|(a, b)| (a - b).abs()),
            qd.values().iter().map(|x| x.abs()),
        );
        Ok::<_, Error>((flux, rhs))
    })();
    let result = result.map_err(CliError::from).and_then(|(flux, rhs)| {
        let passed = flux.rel_linf <= threshold && rhs.rel_linf <= threshold;
        let report = Report { kernel: kernel.name().to_string(), n0: grid.n0(), flux, rhs, threshold, passed };
        write_json(&out.join("compare.json"), &report)?;
        println!("flux rel L∞ {:.3e}, rhs rel L∞ {:.3e} (threshold {threshold:e})", flux.rel_linf, rhs.rel_linf);
        if passed {
            Ok(())
        } else {
            Err(CliError::validation(format!(
                "fast and direct evaluators differ by more than {threshold:e} (flux {:.3e}, rhs {:.3e})",
                flux.rel_linf, rhs.rel_linf
            )))
        }
    });
    manifest.finish(out, started, result)
}
