//! Particle ensembles drawn from solver trajectories.

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ParticleEnsemble;
use crate::error::{Error, Result};
use crate::grid::ScalarField;
use crate::kernels::SsKernel;
use crate::solver::{run_with, FastEvaluator, RunConfig};

/// Inverse-CDF sampling of the trilinear interpolant of a gridded density.
///
/// The conditional chain x → y | x → z | x, y (Knothe–Rosenblatt) maps a
/// uniform triple to a velocity; the map is continuous in the density, so
/// reusing the triples across snapshots keeps particles coherent in time.
#[derive(Debug, Clone)]
pub struct GridSampler {
    n: usize,
    h: f64,
    x0: f64,
    f: Vec<f64>,
    /// cumulative x-cell masses
    cdf_x: Vec<f64>,
    marg_x: Vec<f64>,
}

/// Trapezoid weights (without the factor h).
fn tw(j: usize, n: usize) -> f64 {
    if j == 0 || j + 1 == n {
        0.5
    } else {
        1.0
    }
}

/// Picks a cell from a piecewise-linear density with node values `nodes`,
/// returning `(cell, fraction)` for `u ∈ [0, 1)`.
fn invert_linear(nodes: &[f64], cdf: &[f64], u: f64) -> (usize, f64) {
    let total = *cdf.last().unwrap();
    if !(total > 0.0) {
        return (nodes.len() / 2 - 1, u);
    }
    let target = u * total;
    let c = cdf.partition_point(|&x| x <= target).min(cdf.len() - 1);
    let before = if c == 0 { 0.0 } else { cdf[c - 1] };
    let (a, b) = (nodes[c], nodes[c + 1]);
    // cell mass ∝ (a + b)/2; solve a s + (b − a) s²/2 = r (a + b)/2
    let cell = cdf[c] - before;
    let r = if cell > 0.0 { ((target - before) / cell).clamp(0.0, 1.0) } else { 0.5 };
    let m = r * (a + b) / 2.0;
    let disc = (a * a + 2.0 * (b - a) * m).max(0.0);
    let denom = a + disc.sqrt();
    let s = if denom > 0.0 { 2.0 * m / denom } else { r };
    (c, s.clamp(0.0, 1.0))
}

fn cumulative(nodes: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    nodes
        .windows(2)
        .map(|w| {
            acc += 0.5 * (w[0] + w[1]);
            acc
        })
        .collect()
}

impl GridSampler {
    /// Negative values are treated as zero.
    pub fn new(field: &ScalarField) -> Result<Self> {
        let g = field.grid();
        let n = g.n0();
        let f: Vec<f64> = field.values().iter().map(|x| x.max(0.0)).collect();
        let marg_x: Vec<f64> = (0..n)
            .map(|i| {
                let mut s = 0.0;
                for j in 0..n {
                    for k in 0..n {
                        s += tw(j, n) * tw(k, n) * f[(i * n + j) * n + k];
                    }
                }
                s
            })
            .collect();
        let cdf_x = cumulative(&marg_x);
        if !(*cdf_x.last().unwrap() > 0.0) {
            return Err(Error::Config("cannot sample a density with no positive mass".into()));
        }
        Ok(Self { n, h: g.spacing(), x0: g.axis_coord(0), f, cdf_x, marg_x })
    }

    pub fn sample(&self, u: [f64; 3]) -> Vector3<f64> {
        let n = self.n;
        let (cx, sx) = invert_linear(&self.marg_x, &self.cdf_x, u[0]);
        let slice: Vec<f64> = (0..n * n)
            .map(|jk| (1.0 - sx) * self.f[cx * n * n + jk] + sx * self.f[(cx + 1) * n * n + jk])
            .collect();
        let marg_y: Vec<f64> = (0..n).map(|j| (0..n).map(|k| tw(k, n) * slice[j * n + k]).sum()).collect();
        let (cy, sy) = invert_linear(&marg_y, &cumulative(&marg_y), u[1]);
        let line: Vec<f64> = (0..n).map(|k| (1.0 - sy) * slice[cy * n + k] + sy * slice[(cy + 1) * n + k]).collect();
        let (cz, sz) = invert_linear(&line, &cumulative(&line), u[2]);
        Vector3::new(
            self.x0 + (cx as f64 + sx) * self.h,
            self.x0 + (cy as f64 + sy) * self.h,
            self.x0 + (cz as f64 + sz) * self.h,
        )
    }
}

/// Evolves `f0` with the fast solver and samples `n_samples` velocities at
/// each of `times`. Particle `m` uses the same uniform triple at every time.
pub fn synthesize_ensemble(
    kernel: &SsKernel,
    f0: &ScalarField,
    times: &[f64],
    n_samples: usize,
    seed: u64,
    dt_coefficient: f64,
) -> Result<ParticleEnsemble> {
    if n_samples == 0 {
        return Err(Error::Config("ensemble needs at least one sample per snapshot".into()));
    }
    if times.len() < 2 || times[0] < 0.0 {
        return Err(Error::Config("need at least two non-negative snapshot times".into()));
    }
    let end = *times.last().unwrap();
    let mut config = RunConfig::new(end);
    config.dt_coefficient = dt_coefficient;
    config.snapshots = times.to_vec();
    let eval = FastEvaluator::new(f0.grid(), kernel, config.f_min)?;
    let traj = run_with(f0, &config, &eval, |_| {}).map_err(|e| e.error)?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniforms: Vec<[f64; 3]> = (0..n_samples).map(|_| [rng.random(), rng.random(), rng.random()]).collect();
    let samples = times
        .iter()
        .map(|&t| {
            let f = if t == 0.0 { f0 } else { traj.snapshot_at(t).expect("snapshot requested") };
            let s = GridSampler::new(f)?;
            Ok(uniforms.par_iter().map(|u| s.sample(*u)).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    ParticleEnsemble::new(times.to_vec(), samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::moments;
    use crate::grid::VelocityGrid;
    use crate::initcond;
    use crate::kernels::builtin;

    #[test]
    fn linear_inverse_is_exact() {
        let nodes = [1.0, 3.0];
        let cdf = cumulative(&nodes);
        for u in [0.0, 0.1, 0.5, 0.9] {
            let (_, s) = invert_linear(&nodes, &cdf, u);
            // CDF of 1 + 2s on [0,1] normalized by 2
            let c = (s + s * s) / 2.0;
            assert!((c - u).abs() < 1e-14);
        }
    }

    #[test]
    fn sample_moments_match_field() {
        let g = VelocityGrid::new(3.0, 48).unwrap();
        let f = initcond::bimaxwellian(&g, 0.08, 0.18, 2).unwrap();
        let s = GridSampler::new(&f).unwrap();
        let n = 20_000;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<Vector3<f64>> = (0..n).map(|_| s.sample([rng.random(), rng.random(), rng.random()])).collect();
        let m = moments(&f);
        let mean = v.iter().sum::<Vector3<f64>>() / n as f64;
        let var = [0.18, 0.18, 0.08];
        for k in 0..3 {
            let sd = (var[k] / n as f64).sqrt();
            assert!((mean[k] - m.momentum[k]).abs() <= 4.0 * sd, "{k}: {}", mean[k]);
            let second = v.iter().map(|x| x[k] * x[k]).sum::<f64>() / n as f64;
            let field_second = g.cell_volume()
                * f.values().iter().enumerate().map(|(i, x)| g.node(i)[k].powi(2) * x).sum::<f64>();
            let sd2 = (2.0 * var[k] * var[k] / n as f64).sqrt();
            assert!((second - field_second).abs() <= 4.0 * sd2, "{k}: {second} vs {field_second}");
        }
    }

    #[test]
    fn synthesis_is_deterministic_and_rejects_empty() {
        let g = VelocityGrid::new(3.0, 12).unwrap();
        let f0 = initcond::bimaxwellian(&g, 0.1, 0.2, 0).unwrap();
        let k = builtin::gaussian_ss_relaxation();
        let a = synthesize_ensemble(&k, &f0, &[0.0, 0.02, 0.04], 200, 3, 0.5).unwrap();
        let b = synthesize_ensemble(&k, &f0, &[0.0, 0.02, 0.04], 200, 3, 0.5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.n_snapshots(), 3);
        assert!(synthesize_ensemble(&k, &f0, &[0.0, 0.02], 0, 3, 0.5).is_err());
        // coherent particles move little between snapshots
        let d = a.snapshot(0).iter().zip(a.snapshot(1)).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
        assert!(d < 0.1, "{d}");
    }
}
