//! Built-in kernels.

use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::basis::UnivariateBasis;
use super::ss::{projector, Mode, SsKernel};
use super::{CollisionKernel, KernelMatrix};
use crate::error::{Error, Result};

/// `ω = c P / max(|u|, reg)`, the classical Landau-type kernel. Not separable.
#[derive(Debug, Clone)]
pub struct LandauLike {
    c: f64,
    reg: f64,
}

impl LandauLike {
    pub fn new(c: f64, reg: f64) -> Self {
        Self { c, reg }
    }
}

impl CollisionKernel for LandauLike {
    fn omega(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> KernelMatrix {
        let u = v - vp;
        let u2 = u.norm_squared();
        if u2 == 0.0 {
            return Matrix3::zeros();
        }
        projector(&u, u2) * (self.c / u2.sqrt().max(self.reg))
    }

    fn name(&self) -> &str {
        "landau_like"
    }
}

/// `ω = c P`. Not separable.
#[derive(Debug, Clone)]
pub struct ConstantP {
    c: f64,
}

impl ConstantP {
    pub fn new(c: f64) -> Self {
        Self { c }
    }
}

impl CollisionKernel for ConstantP {
    fn omega(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> KernelMatrix {
        let u = v - vp;
        let u2 = u.norm_squared();
        if u2 == 0.0 {
            return Matrix3::zeros();
        }
        projector(&u, u2) * self.c
    }

    fn name(&self) -> &str {
        "constant_p"
    }
}

/// Gaussian mode `ℒ = a·exp(-x²/wl²)`, `ℳ = exp(-x²/wm²)`, `𝒩 = exp(-x²/wn²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianMode {
    pub amplitude: f64,
    pub wl: f64,
    pub wm: f64,
    pub wn: f64,
}

impl GaussianMode {
    pub const fn new(amplitude: f64, wl: f64, wm: f64, wn: f64) -> Self {
        Self { amplitude, wl, wm, wn }
    }

    fn to_mode(self) -> Mode {
        Mode::new(
            UnivariateBasis::gaussian(self.amplitude, self.wl),
            UnivariateBasis::gaussian(1.0, self.wm),
            UnivariateBasis::gaussian(1.0, self.wn),
        )
    }
}

/// Separable kernel with gaussian bases in both channels.
pub fn gaussian_ss(name: &str, channel1: &[GaussianMode], channel2: &[GaussianMode]) -> Result<SsKernel> {
    if channel1.is_empty() && channel2.is_empty() {
        return Err(Error::Config("gaussian_ss needs at least one mode".into()));
    }
    SsKernel::new(
        name,
        channel1.iter().map(|m| m.to_mode()).collect(),
        channel2.iter().map(|m| m.to_mode()).collect(),
    )
}

/// One mode per channel, `ℳ = 𝒩`; the workhorse for time-dependent runs.
pub const RELAXATION_MODES: [GaussianMode; 2] = [
    GaussianMode::new(0.25, 1.5, 2.0, 2.0),
    GaussianMode::new(0.15, 1.5, 2.0, 2.0),
];

/// Two distinct modes per channel, exercising every mode-pair path.
pub const ORACLE_MODES: [[GaussianMode; 2]; 2] = [
    [GaussianMode::new(0.6, 1.2, 1.5, 2.0), GaussianMode::new(0.4, 0.8, 2.2, 1.1)],
    [GaussianMode::new(0.5, 1.0, 1.8, 1.3), GaussianMode::new(0.3, 1.6, 1.2, 2.4)],
];

pub fn gaussian_ss_relaxation() -> SsKernel {
    gaussian_ss("gaussian_ss", &RELAXATION_MODES[..1], &RELAXATION_MODES[1..]).expect("valid preset")
}

pub fn gaussian_ss_oracle() -> SsKernel {
    gaussian_ss("gaussian_ss", &ORACLE_MODES[0], &ORACLE_MODES[1]).expect("valid preset")
}

/// Gaussian kernel with `j_prime` modes per channel and widths spread around `widths`.
pub fn gaussian_ss_modes(j_prime: usize, amplitude: f64, widths: [f64; 3]) -> Result<SsKernel> {
    if j_prime == 0 {
        return Err(Error::Config("gaussian_ss needs j_prime >= 1".into()));
    }
    let make = |c: usize| -> Vec<GaussianMode> {
        (0..j_prime)
            .map(|j| {
                let s = 1.0 + 0.35 * j as f64 + 0.1 * c as f64;
                GaussianMode::new(
                    amplitude / (1.0 + j as f64 + c as f64),
                    widths[0] * s,
                    widths[1] / s,
                    widths[2] * (1.0 + 0.2 * j as f64),
                )
            })
            .collect()
    };
    gaussian_ss("gaussian_ss", &make(0), &make(1))
}

/// Names accepted by [`resolve`].
pub const BUILTIN_NAMES: [&str; 4] = ["gaussian_ss", "gaussian_ss_oracle", "landau_like", "constant_p"];

/// A built-in kernel by name, or an SS kernel loaded from a JSON file path.
pub fn resolve(reference: &str) -> Result<Arc<dyn CollisionKernel>> {
    Ok(match reference {
        "gaussian_ss" => Arc::new(gaussian_ss_relaxation()),
        "gaussian_ss_oracle" => Arc::new(gaussian_ss_oracle()),
        "landau_like" => Arc::new(LandauLike::new(1.0, 1e-3)),
        "constant_p" => Arc::new(ConstantP::new(1.0)),
        path => {
            let p = std::path::Path::new(path);
            if !p.exists() {
                return Err(Error::Config(format!(
                    "kernel {path:?} is neither a built-in ({}) nor an existing file",
                    BUILTIN_NAMES.join(", ")
                )));
            }
            Arc::new(SsKernel::load(p)?)
        }
    })
}
