//! Collision kernels: the separable two-channel family, simple stationary
//! baselines, finite-difference divergences and admissibility checks.

pub mod admissibility;
pub mod basis;
pub mod builtin;
pub mod ss;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

pub use admissibility::{check_admissibility, AdmissibilityReport};
pub use basis::{CubicSpline, ParamKind, UnivariateBasis};
pub use ss::{Mode, SsKernel, KERNEL_FORMAT};

/// Symmetric 3×3 kernel value `ω(v, v')`.
pub type KernelMatrix = Matrix3<f64>;

/// Anything that can produce `ω(v, v')`.
pub trait CollisionKernel: Send + Sync {
    fn omega(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> KernelMatrix;

    fn name(&self) -> &str;

    /// The separable representation, if the kernel has one.
    fn as_ss(&self) -> Option<&SsKernel> {
        None
    }
}

/// Default step for [`kernel_divergence_v`] and [`kernel_divergence_vprime`].
pub const DIVERGENCE_STEP: f64 = 1e-4;

fn check_stencil(v: &Vector3<f64>, vp: &Vector3<f64>, delta: f64) -> Result<()> {
    if !(delta > 0.0) {
        return Err(Error::Config("divergence step must be positive".into()));
    }
    let un = (v - vp).norm();
    if un <= 2.0 * delta {
        return Err(Error::DegenerateGeometry(format!(
            "|u| = {un:e} too small for divergence step {delta:e}"
        )));
    }
    Ok(())
}

/// `Σ_j ∂ω_ij/∂v_j` by central differences.
pub fn kernel_divergence_v(
    kernel: &dyn CollisionKernel,
    v: &Vector3<f64>,
    vp: &Vector3<f64>,
    delta: f64,
) -> Result<Vector3<f64>> {
    check_stencil(v, vp, delta)?;
    let mut out = Vector3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = delta;
        let d = (kernel.omega(&(v + e), vp) - kernel.omega(&(v - e), vp)) / (2.0 * delta);
        out += d.column(j);
    }
    Ok(out)
}

/// `Σ_j ∂ω_ij/∂v'_j` by central differences.
pub fn kernel_divergence_vprime(
    kernel: &dyn CollisionKernel,
    v: &Vector3<f64>,
    vp: &Vector3<f64>,
    delta: f64,
) -> Result<Vector3<f64>> {
    check_stencil(v, vp, delta)?;
    let mut out = Vector3::zeros();
    for j in 0..3 {
        let mut e = Vector3::zeros();
        e[j] = delta;
        let d = (kernel.omega(v, &(vp + e)) - kernel.omega(v, &(vp - e))) / (2.0 * delta);
        out += d.column(j);
    }
    Ok(out)
}
