//! Weak-form fitting of kernels to particle velocity samples.
//!
//! Data side: `(∂fⁿ/∂t, ψ) ≈ (1/(N Δt)) Σ_m [ψ(v_mⁿ⁺¹) − ψ(v_mⁿ)]`.
//! Model side: `(Q(f), ψ) = E_{f⊗f}[ω_ij ∂_ijψ + (∂_jω_ij − ∂'_jω_ij) ∂_iψ]`,
//! estimated over random sample pairs.

mod ensemble;
mod fit;
mod synth;
mod testfn;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use ensemble::ParticleEnsemble;
pub use fit::{fit, FitConfig, FitResult};
pub use synth::{synthesize_ensemble, GridSampler};
pub use testfn::{Radial, TestFunction, TestFunctionSet};

use crate::error::{Error, Result};
use crate::kernels::{kernel_divergence_v, kernel_divergence_vprime, CollisionKernel, DIVERGENCE_STEP};

/// Finite-difference estimate of `(∂fⁿ/∂t, ψ)` between snapshots `n` and `n+1`.
pub fn md_side_moment(ens: &ParticleEnsemble, psi: &TestFunction, n: usize) -> Result<f64> {
    if n + 1 >= ens.n_snapshots() {
        return Err(Error::Config(format!("snapshot {n} has no successor (N_T = {})", ens.n_snapshots() - 1)));
    }
    let s: f64 =
        ens.snapshot(n + 1).iter().zip(ens.snapshot(n)).map(|(b, a)| psi.value(b) - psi.value(a)).sum();
    Ok(s / (ens.n_samples() as f64 * ens.dt()))
}

/// A fixed set of sample-index pairs with the weight that turns their sum
/// into an estimate of `(1/N²) Σ_{m,m'}`.
#[derive(Debug, Clone)]
pub struct PairBatch {
    pairs: Vec<(u32, u32)>,
    weight: f64,
}

impl PairBatch {
    /// `p` pairs drawn uniformly among `m ≠ m'` with `|v − v'|` above the
    /// divergence stencil; `p = N²` gives the full double sum instead.
    pub fn draw(samples: &[Vector3<f64>], p: usize, seed: u64, stream: u64) -> Result<Self> {
        let n = samples.len();
        if p == 0 {
            return Err(Error::Config("pair count must be at least 1".into()));
        }
        if n < 2 || p > n * n {
            return Err(Error::Config(format!("pair count {p} not in 1..={} for {n} samples", n * n)));
        }
        let ok = |a: usize, b: usize| a != b && (samples[a] - samples[b]).norm() > 2.0 * DIVERGENCE_STEP;
        let nf = n as f64;
        if p == n * n {
            let pairs = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).filter(|&(a, b)| ok(a, b));
            return Ok(Self { pairs: pairs.map(|(a, b)| (a as u32, b as u32)).collect(), weight: 1.0 / (nf * nf) });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let mut pairs = Vec::with_capacity(p);
        let mut tries = 0usize;
        while pairs.len() < p {
            tries += 1;
            if tries > 100 * p + 1000 {
                return Err(Error::Numerical("could not draw non-degenerate sample pairs".into()));
            }
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            if ok(a, b) {
                pairs.push((a as u32, b as u32));
            }
        }
        // mean over off-diagonal pairs, rescaled to the 1/N² double sum
        Ok(Self { pairs, weight: (nf - 1.0) / (nf * p as f64) })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Model-side moments `(Q(f), ψ_k)` for every `ψ_k` over one pair batch.
pub fn kinetic_side_moments(
    samples: &[Vector3<f64>],
    kernel: &dyn CollisionKernel,
    tests: &TestFunctionSet,
    batch: &PairBatch,
) -> Result<Vec<f64>> {
    let k = tests.len();
    // fixed chunks summed in order keep the result independent of scheduling
    let partial: Vec<Vec<f64>> = batch
        .pairs
        .par_chunks(512)
        .map(|chunk| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; k];
            for &(a, b) in chunk {
                let (v, vp) = (&samples[a as usize], &samples[b as usize]);
                let w = kernel.omega(v, vp);
                let div = kernel_divergence_v(kernel, v, vp, DIVERGENCE_STEP)?
                    - kernel_divergence_vprime(kernel, v, vp, DIVERGENCE_STEP)?;
                for (s, psi) in acc.iter_mut().zip(tests.funcs()) {
                    let (g, h) = psi.derivatives(v);
                    *s += w.component_mul(&h).sum() + div.dot(&g);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; k];
    for p in partial {
        sums.iter_mut().zip(p).for_each(|(a, b)| *a += b);
    }
    Ok(sums.into_iter().map(|s| s * batch.weight).collect())
}

/// `(Q(fⁿ), ψ)` from `p` random pairs of snapshot `n`.
pub fn kinetic_side_moment(
    ens: &ParticleEnsemble,
    n: usize,
    kernel: &dyn CollisionKernel,
    psi: &TestFunction,
    p: usize,
    seed: u64,
) -> Result<f64> {
    if n >= ens.n_snapshots() {
        return Err(Error::Config(format!("snapshot {n} out of range")));
    }
    let batch = PairBatch::draw(ens.snapshot(n), p, seed, n as u64)?;
    let tests = TestFunctionSet::new(vec![*psi])?;
    Ok(kinetic_side_moments(ens.snapshot(n), kernel, &tests, &batch)?[0])
}

/// RNG stream offset for the second, independent set of batches.
const CONTROL_STREAM: u64 = 1 << 32;

/// The weak-form loss with its data side and pair batches frozen.
#[derive(Debug, Clone)]
pub struct WeakFormObjective<'a> {
    ens: &'a ParticleEnsemble,
    tests: TestFunctionSet,
    /// `[n][k]`
    md: Vec<Vec<f64>>,
    batches: Vec<PairBatch>,
    control: Option<Vec<PairBatch>>,
}

fn draw_all(ens: &ParticleEnsemble, p: usize, seed: u64, offset: u64) -> Result<Vec<PairBatch>> {
    (0..ens.n_snapshots() - 1).map(|n| PairBatch::draw(ens.snapshot(n), p, seed, offset + n as u64)).collect()
}

impl<'a> WeakFormObjective<'a> {
    pub fn new(ens: &'a ParticleEnsemble, tests: &TestFunctionSet, p: usize, seed: u64) -> Result<Self> {
        let nt = ens.n_snapshots() - 1;
        let md = (0..nt)
            .map(|n| tests.funcs().iter().map(|psi| md_side_moment(ens, psi, n)).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let batches = draw_all(ens, p, seed, 0)?;
        Ok(Self { ens, tests: tests.clone(), md, batches, control: None })
    }

    /// Adds a second batch set, independent of the first, for [`cross_loss`](Self::cross_loss).
    pub fn with_control(mut self, p: usize, seed: u64) -> Result<Self> {
        self.control = Some(draw_all(self.ens, p, seed, CONTROL_STREAM)?);
        Ok(self)
    }

    /// Redraws the pair batches, keeping the data side.
    pub fn reseed(&mut self, p: usize, seed: u64) -> Result<()> {
        self.batches = draw_all(self.ens, p, seed, 0)?;
        if self.control.is_some() {
            self.control = Some(draw_all(self.ens, p, seed, CONTROL_STREAM)?);
        }
        Ok(())
    }

    /// `[n][k]` data-side moments.
    pub fn md_moments(&self) -> &[Vec<f64>] {
        &self.md
    }

    /// `[n][k]` model-side moments.
    pub fn kinetic_moments(&self, kernel: &dyn CollisionKernel) -> Result<Vec<Vec<f64>>> {
        moments_over(self.ens, kernel, &self.tests, &self.batches)
    }

    pub fn loss(&self, kernel: &dyn CollisionKernel) -> Result<f64> {
        let kin = self.kinetic_moments(kernel)?;
        Ok(self.md.iter().flatten().zip(kin.iter().flatten()).map(|(a, b)| (a - b) * (a - b)).sum())
    }

    /// `Σ (kinetic_A − md)(kinetic_B − md)` over the two independent batch
    /// sets. Its expectation is the loss without pair-sampling noise, which
    /// otherwise adds `Var(kinetic)` and pulls fits toward weaker kernels.
    ///
    /// # Errors
    /// [`Error::Config`] without [`with_control`](Self::with_control).
    pub fn cross_loss(&self, kernel: &dyn CollisionKernel) -> Result<f64> {
        Ok(self.both_losses(kernel)?.1)
    }

    /// `(loss, cross_loss)` sharing the first batch evaluation.
    pub(crate) fn both_losses(&self, kernel: &dyn CollisionKernel) -> Result<(f64, f64)> {
        let control = self.control.as_ref().ok_or_else(|| Error::Config("cross loss needs control batches".into()))?;
        let a = self.kinetic_moments(kernel)?;
        let b = moments_over(self.ens, kernel, &self.tests, control)?;
        let (mut plain, mut cross) = (0.0, 0.0);
        for (m, (x, y)) in self.md.iter().flatten().zip(a.iter().flatten().zip(b.iter().flatten())) {
            plain += (x - m) * (x - m);
            cross += (x - m) * (y - m);
        }
        Ok((plain, cross))
    }
}

fn moments_over(
    ens: &ParticleEnsemble,
    kernel: &dyn CollisionKernel,
    tests: &TestFunctionSet,
    batches: &[PairBatch],
) -> Result<Vec<Vec<f64>>> {
    batches.iter().enumerate().map(|(n, b)| kinetic_side_moments(ens.snapshot(n), kernel, tests, b)).collect()
}

/// `Σ_k Σ_n (md − kinetic)²` with `p` pairs per snapshot.
pub fn loss(ens: &ParticleEnsemble, kernel: &dyn CollisionKernel, tests: &TestFunctionSet, p: usize, seed: u64) -> Result<f64> {
    WeakFormObjective::new(ens, tests, p, seed)?.loss(kernel)
}
