//! FFT-accelerated collision flux for separable kernels.

pub mod fft3;
mod flux;
mod plan;
pub mod terms;

pub use flux::{collision_flux_fast, collision_rhs_fast};
pub use plan::ConvolutionPlan;
pub use terms::{Beta, Contraction, Owner, Radial, TermSpec, TermTable};
