use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Serialize;
use serde_json::json;
use spectral_collision::kernels::{builtin, check_admissibility};
use spectral_collision::SsKernel;

use super::Manifest;
use crate::config::{create_dir, write_json};
use crate::error::{CliError, CliResult};

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    /// Built-in kernel name or kernel file.
    #[arg(long)]
    pub kernel: String,
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest accepted relative violation.
    #[arg(long, default_value_t = 1e-10)]
    pub tolerance: f64,
    /// Upper end of the tabulated |u|, |v|, |v'| range.
    #[arg(long, default_value_t = 3.0)]
    pub v_max: f64,
    /// Lattice points per axis.
    #[arg(long, default_value_t = 13)]
    pub points: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct SliceRow {
    u: f64,
    v: f64,
    vp: f64,
    g1_sq: f64,
    g2_sq: f64,
    g_s_sq: f64,
    g_r_sq: f64,
}

/// `|𝓟r|²` for speeds `(|u|, |v|, |v'|)`; `None` when no such triangle exists.
fn projected_r_sq(u: f64, v: f64, vp: f64) -> Option<f64> {
    if u > v + vp || v > u + vp || vp > u + v || u == 0.0 {
        return None;
    }
    let r2 = 2.0 * v * v + 2.0 * vp * vp - u * u;
    let ur = v * v - vp * vp;
    Some((r2 - ur * ur / (u * u)).max(0.0))
}

fn slices(k: &SsKernel, v_max: f64, points: usize) -> Vec<SliceRow> {
    let axis: Vec<f64> = (0..points).map(|i| v_max * i as f64 / (points - 1) as f64).collect();
    let mut rows = Vec::with_capacity(points.pow(3));
    for &u in &axis {
        for &v in &axis {
            for &vp in &axis {
                let g1 = k.eval_g(1, u, v, vp);
                let g2 = k.eval_g(2, u, v, vp);
                let pr = projected_r_sq(u, v, vp).unwrap_or(f64::NAN);
                rows.push(SliceRow { u, v, vp, g1_sq: g1 * g1, g2_sq: g2 * g2, g_s_sq: g1 * g1 * pr, g_r_sq: g2 * g2 * pr });
            }
        }
    }
    rows
}

pub fn run(a: &DiagnoseArgs) -> CliResult<()> {
    if a.samples == 0 || a.points < 2 || !(a.v_max > 0.0) {
        return Err(CliError::validation("need samples ≥ 1, points ≥ 2 and a positive v-max"));
    }
    let started = Instant::now();
    let kernel = builtin::resolve(&a.kernel).map_err(|e| CliError::from(e).at("--kernel"))?;
    create_dir(&a.out)?;
    let config = json!({
        "kernel": a.kernel, "samples": a.samples, "seed": a.seed,
        "tolerance": a.tolerance, "v_max": a.v_max, "points": a.points,
    });
    let manifest = Manifest::new("diagnose-kernel", config, json!({ "name": kernel.name() }));
    let result = (|| {
        let report = check_admissibility(kernel.as_ref(), a.samples, a.seed);
        let passed = report.passes(a.tolerance);
        write_json(&a.out.join("admissibility.json"), &json!({ "report": report, "worst": report.worst(), "passed": passed }))?;
        match kernel.as_ss() {
            Some(ss) => {
                let mut w = csv::Writer::from_path(a.out.join("g2_slices.csv"))?;
                for r in slices(ss, a.v_max, a.points) {
                    w.serialize(r)?;
                }
                w.flush()?;
            }
            None => eprintln!("note: '{}' is not separable; no channel export", kernel.name()),
        }
        println!("worst violation {:.3e} (tolerance {:e})", report.worst(), a.tolerance);
        if passed {
            Ok(())
        } else {
            Err(CliError::validation(format!("admissibility violation {:.3e} exceeds {:e}", report.worst(), a.tolerance)))
        }
    })();
    manifest.finish(&a.out, started, result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spectral_collision::Vector3;

    #[test]
    fn projected_r_matches_vectors() {
        let (v, vp) = (Vector3::new(0.3, -0.5, 0.9), Vector3::new(-0.2, 0.4, 0.1));
        let (u, r) = (v - vp, v + vp);
        let ue = u.normalize();
        let want = (r - ue * ue.dot(&r)).norm_squared();
        let got = projected_r_sq(u.norm(), v.norm(), vp.norm()).unwrap();
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        assert!(projected_r_sq(3.0, 1.0, 1.0).is_none());
    }
}
