//! Sampled checks of the structural kernel conditions.

use nalgebra::{SymmetricEigen, UnitQuaternion, Vector3, Quaternion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use super::CollisionKernel;

/// Largest relative violation of each condition over the sampled pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    /// `ω(Uv, Uv') = U ω(v, v') Uᵀ`
    pub rotation: f64,
    /// `ω(v, v') = ω(v', v)`
    pub permutation: f64,
    /// `ω u = 0`
    pub orthogonality: f64,
    /// smallest eigenvalue `≥ 0`
    pub psd: f64,
    /// `ω(v, v') = ω(-v, -v')`
    pub parity: f64,
    pub samples: usize,
}

impl AdmissibilityReport {
    pub fn worst(&self) -> f64 {
        self.rotation.max(self.permutation).max(self.orthogonality).max(self.psd).max(self.parity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst() <= tol
    }
}

fn normal3(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    Vector3::new(StandardNormal.sample(rng), StandardNormal.sample(rng), StandardNormal.sample(rng))
}

fn random_rotation(rng: &mut ChaCha8Rng) -> nalgebra::Matrix3<f64> {
    let q = Quaternion::new(
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
        StandardNormal.sample(rng),
    );
    UnitQuaternion::from_quaternion(q).to_rotation_matrix().into_inner()
}

/// Samples `sample_count` pairs with standard-normal velocities and records the worst violations.
///
/// Violations are relative to the Frobenius norm of `ω` (and `|u|` for orthogonality);
/// pairs where `ω` vanishes contribute their absolute violation.
pub fn check_admissibility(kernel: &dyn CollisionKernel, sample_count: usize, seed: u64) -> AdmissibilityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rep = AdmissibilityReport {
        rotation: 0.0,
        permutation: 0.0,
        orthogonality: 0.0,
        psd: 0.0,
        parity: 0.0,
        samples: 0,
    };
    while rep.samples < sample_count {
        let v = normal3(&mut rng);
        let vp = normal3(&mut rng);
        let u = v - vp;
        if u.norm() < 1e-6 {
            continue;
        }
        rep.samples += 1;
        let w = kernel.omega(&v, &vp);
        let norm = w.norm();
        let rel = |x: f64| if norm > 0.0 { x / norm } else { x };

        let rot = random_rotation(&mut rng);
        let wr = kernel.omega(&(rot * v), &(rot * vp));
        rep.rotation = rep.rotation.max(rel((wr - rot * w * rot.transpose()).norm()));
        rep.permutation = rep.permutation.max(rel((w - kernel.omega(&vp, &v)).norm()));
        rep.orthogonality = rep.orthogonality.max(rel((w * u).norm() / u.norm()));
        let sym = (w + w.transpose()) * 0.5;
        let lmin = SymmetricEigen::new(sym).eigenvalues.min();
        rep.psd = rep.psd.max(rel((-lmin).max(0.0)));
        rep.parity = rep.parity.max(rel((w - kernel.omega(&(-v), &(-vp))).norm()));
    }
    rep
}
