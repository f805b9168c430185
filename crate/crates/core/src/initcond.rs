//! Initial velocity distributions, sampled at nodes and renormalized to unit
//! discrete mass.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ScalarField, VelocityGrid};

/// `1.65 ∏ᵢ [exp(−(vᵢ−0.34)²/0.057) + exp(−(vᵢ+0.34)²/0.057)]`, unnormalized.
pub fn gmm_density(v: &Vector3<f64>) -> f64 {
    let bump = |x: f64| (-(x - 0.34).powi(2) / 0.057).exp() + (-(x + 0.34).powi(2) / 0.057).exp();
    1.65 * bump(v[0]) * bump(v[1]) * bump(v[2])
}

/// `1.254 exp(−3.535|v|²) cos²(7.07|v|²)`, unnormalized.
pub fn rm_density(v: &Vector3<f64>) -> f64 {
    let r2 = v.norm_squared();
    1.254 * (-3.535 * r2).exp() * (7.07 * r2).cos().powi(2)
}

fn normalized(mut f: ScalarField) -> Result<ScalarField> {
    let m = f.integral();
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::Config(format!("initial condition has no mass on this grid ({m})")));
    }
    f.scale(1.0 / m);
    Ok(f)
}

pub fn gmm(grid: &VelocityGrid) -> ScalarField {
    normalized(ScalarField::from_fn(*grid, gmm_density)).expect("gmm has positive mass on any grid")
}

pub fn rm(grid: &VelocityGrid) -> ScalarField {
    normalized(ScalarField::from_fn(*grid, rm_density)).expect("rm has positive mass at the origin node")
}

pub fn maxwellian(grid: &VelocityGrid, temperature: f64) -> Result<ScalarField> {
    bimaxwellian(grid, temperature, temperature, 0)
}

/// Temperature `t_parallel` along `axis`, `t_perp` across it.
pub fn bimaxwellian(grid: &VelocityGrid, t_parallel: f64, t_perp: f64, axis: usize) -> Result<ScalarField> {
    if !(t_parallel > 0.0 && t_perp > 0.0) {
        return Err(Error::Config("temperatures must be positive".into()));
    }
    if axis > 2 {
        return Err(Error::Config(format!("axis {axis} out of range")));
    }
    normalized(ScalarField::from_fn(*grid, |v| {
        let par = v[axis] * v[axis];
        let perp = v.norm_squared() - par;
        (-par / (2.0 * t_parallel) - perp / (2.0 * t_perp)).exp()
    }))
}

/// Indicator of `|v| ≤ radius`.
pub fn uniform_ball(grid: &VelocityGrid, radius: f64) -> Result<ScalarField> {
    if !(radius > 0.0) {
        return Err(Error::Config("radius must be positive".into()));
    }
    normalized(ScalarField::from_fn(*grid, |v| if v.norm() <= radius { 1.0 } else { 0.0 }))
}

/// Named initial condition, as accepted in run configurations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    Gmm,
    Rm,
    Maxwellian { temperature: f64 },
    Bimaxwellian { t_parallel: f64, t_perp: f64, #[serde(default)] axis: usize },
    UniformBall { radius: f64 },
}

impl InitialCondition {
    pub fn build(&self, grid: &VelocityGrid) -> Result<ScalarField> {
        match *self {
            Self::Gmm => Ok(gmm(grid)),
            Self::Rm => Ok(rm(grid)),
            Self::Maxwellian { temperature } => maxwellian(grid, temperature),
            Self::Bimaxwellian { t_parallel, t_perp, axis } => bimaxwellian(grid, t_parallel, t_perp, axis),
            Self::UniformBall { radius } => uniform_ball(grid, radius),
        }
    }

    /// Parses `gmm`, `rm`, `maxwellian:T`, `bimaxwellian:T1,T2[,axis]`, `uniform_ball:R`.
    pub fn parse(s: &str) -> Result<Self> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        let nums: Vec<f64> = if args.is_empty() {
            Vec::new()
        } else {
            args.split(',')
                .map(|a| a.trim().parse::<f64>().map_err(|e| Error::Config(format!("bad number {a:?}: {e}"))))
                .collect::<Result<_>>()?
        };
        let want = |n: usize| {
            if nums.len() == n {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} takes {n} parameter(s), got {}", nums.len())))
            }
        };
        match name {
            "gmm" => want(0).map(|_| Self::Gmm),
            "rm" => want(0).map(|_| Self::Rm),
            "maxwellian" => want(1).map(|_| Self::Maxwellian { temperature: nums[0] }),
            "bimaxwellian" => {
                if nums.len() == 3 {
                    Ok(Self::Bimaxwellian { t_parallel: nums[0], t_perp: nums[1], axis: nums[2] as usize })
                } else {
                    want(2).map(|_| Self::Bimaxwellian { t_parallel: nums[0], t_perp: nums[1], axis: 0 })
                }
            }
            "uniform_ball" => want(1).map(|_| Self::UniformBall { radius: nums[0] }),
            other => Err(Error::Config(format!("unknown initial condition {other:?}"))),
        }
    }
}
