//! Bracket terms `{α(v), β(u), γ(v')}` whose sum rebuilds the kernel.
//!
//! With `g` set to one, the channel-1 table sums to `|Pr|² P` and the
//! channel-2 table to `P r rᵀ P`. The full kernel is
//! `g₁² T₁ + g₂² T₂ − g₁² T₂`, so the `T₂` terms appear twice: once with
//! channel 2 and sign `+1`, once with channel 1 and sign `−1`.

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Radial power and optional vector factor of `α` or `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Radial {
    /// `|x|^p`
    Scalar(u8),
    /// `x |x|^p`
    Vector(u8),
}

impl Radial {
    pub fn rank(self) -> usize {
        match self {
            Radial::Scalar(_) => 0,
            Radial::Vector(_) => 1,
        }
    }

    pub fn power(self) -> u8 {
        match self {
            Radial::Scalar(p) | Radial::Vector(p) => p,
        }
    }
}

/// The `u`-dependent factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Beta {
    /// `P`
    P,
    /// `|u|² P`
    U2P,
    /// `|u|⁻² P`
    Um2P,
    /// `u`
    U,
    /// `|u|⁻² u`
    Um2U,
    /// `u uᵀ`
    UUt,
    /// `|u|⁻⁴ u uᵀ`
    Um4UUt,
    /// `1`
    One,
}

impl Beta {
    pub const ALL: [Beta; 8] = [Beta::P, Beta::U2P, Beta::Um2P, Beta::U, Beta::Um2U, Beta::UUt, Beta::Um4UUt, Beta::One];

    pub fn rank(self) -> usize {
        match self {
            Beta::One => 0,
            Beta::U | Beta::Um2U => 1,
            _ => 2,
        }
    }

    /// Component `(a, b)` of the field at `u`; vectors use `a`, scalars ignore both.
    /// Zero at `u = 0`.
    pub fn component(self, u: &Vector3<f64>, a: usize, b: usize) -> f64 {
        let u2 = u.norm_squared();
        if u2 == 0.0 {
            return 0.0;
        }
        let delta = if a == b { 1.0 } else { 0.0 };
        let proj = delta - u[a] * u[b] / u2;
        match self {
            Beta::P => proj,
            Beta::U2P => u2 * delta - u[a] * u[b],
            Beta::Um2P => proj / u2,
            Beta::U => u[a],
            Beta::Um2U => u[a] / u2,
            Beta::UUt => u[a] * u[b],
            Beta::Um4UUt => u[a] * u[b] / (u2 * u2),
            Beta::One => 1.0,
        }
    }

    fn matrix(self, u: &Vector3<f64>) -> Matrix3<f64> {
        Matrix3::from_fn(|a, b| self.component(u, a, b))
    }

    fn vector(self, u: &Vector3<f64>) -> Vector3<f64> {
        Vector3::from_fn(|a, _| self.component(u, a, 0))
    }
}

/// Which factor carries the row or column index of the term matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Owner {
    Alpha,
    Beta,
    Gamma,
}

/// Index pattern of a term, by (row owner, column owner).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contraction {
    /// `α β_ab γ`
    BetaBeta,
    /// `v_a β_b γ`
    AlphaBeta,
    /// `v_a β v'_b`
    AlphaGamma,
    /// `α β_a v'_b`
    BetaGamma,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TermSpec {
    pub channel: usize,
    pub sign: f64,
    pub coeff: f64,
    pub alpha: Radial,
    pub beta: Beta,
    pub gamma: Radial,
    pub row: Owner,
    pub col: Owner,
}

impl TermSpec {
    fn new(channel: usize, sign: f64, coeff: f64, alpha: Radial, beta: Beta, gamma: Radial) -> Result<Self> {
        let ranks = (alpha.rank(), beta.rank(), gamma.rank());
        let (row, col) = match ranks {
            (0, 2, 0) => (Owner::Beta, Owner::Beta),
            (1, 1, 0) => (Owner::Alpha, Owner::Beta),
            (1, 0, 1) => (Owner::Alpha, Owner::Gamma),
            (0, 1, 1) => (Owner::Beta, Owner::Gamma),
            _ => return Err(Error::Numerical(format!("term with ranks {ranks:?} is not a matrix"))),
        };
        Ok(Self { channel, sign, coeff, alpha, beta, gamma, row, col })
    }

    pub fn contraction(&self) -> Contraction {
        match (self.row, self.col) {
            (Owner::Beta, Owner::Beta) => Contraction::BetaBeta,
            (Owner::Alpha, Owner::Beta) => Contraction::AlphaBeta,
            (Owner::Alpha, Owner::Gamma) => Contraction::AlphaGamma,
            (Owner::Beta, Owner::Gamma) => Contraction::BetaGamma,
            _ => unreachable!("owners fixed at construction"),
        }
    }

    /// `coeff · α(v) β(u) γ(v')` as a 3×3 matrix, without sign or channel weight.
    pub fn matrix(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> Matrix3<f64> {
        let u = v - vp;
        let ap = v.norm().powi(self.alpha.power() as i32);
        let gp = vp.norm().powi(self.gamma.power() as i32);
        let m = match self.contraction() {
            Contraction::BetaBeta => self.beta.matrix(&u) * (ap * gp),
            Contraction::AlphaBeta => v * self.beta.vector(&u).transpose() * (ap * gp),
            Contraction::AlphaGamma => v * vp.transpose() * (ap * gp * self.beta.component(&u, 0, 0)),
            Contraction::BetaGamma => self.beta.vector(&u) * vp.transpose() * (ap * gp),
        };
        m * self.coeff
    }
}

/// The 6 + 11 + 11 bracket terms.
#[derive(Debug, Clone)]
pub struct TermTable {
    terms: Vec<TermSpec>,
}

type Row = (f64, Radial, Beta, Radial);

const fn s(p: u8) -> Radial {
    Radial::Scalar(p)
}

const fn vv(p: u8) -> Radial {
    Radial::Vector(p)
}

/// `|Pr|² P`
const FIRST: [Row; 6] = [
    (2.0, s(2), Beta::P, s(0)),
    (2.0, s(0), Beta::P, s(2)),
    (-1.0, s(0), Beta::U2P, s(0)),
    (-1.0, s(4), Beta::Um2P, s(0)),
    (2.0, s(2), Beta::Um2P, s(2)),
    (-1.0, s(0), Beta::Um2P, s(4)),
];

/// `P r rᵀ P`
const SECOND: [Row; 11] = [
    (2.0, vv(0), Beta::U, s(0)),
    (4.0, vv(0), Beta::One, vv(0)),
    (-1.0, s(0), Beta::UUt, s(0)),
    (-2.0, s(0), Beta::U, vv(0)),
    (-2.0, vv(2), Beta::Um2U, s(0)),
    (-2.0, s(2), Beta::Um2U, vv(0)),
    (2.0, vv(0), Beta::Um2U, s(2)),
    (2.0, s(0), Beta::Um2U, vv(2)),
    (1.0, s(4), Beta::Um4UUt, s(0)),
    (-2.0, s(2), Beta::Um4UUt, s(2)),
    (1.0, s(0), Beta::Um4UUt, s(4)),
];

impl TermTable {
    /// Builds the table and checks both block identities on 200 random pairs.
    pub fn build() -> Result<Self> {
        let mut terms = Vec::with_capacity(28);
        for &(c, a, b, g) in &FIRST {
            terms.push(TermSpec::new(1, 1.0, c, a, b, g)?);
        }
        for &(c, a, b, g) in &SECOND {
            terms.push(TermSpec::new(2, 1.0, c, a, b, g)?);
        }
        for &(c, a, b, g) in &SECOND {
            terms.push(TermSpec::new(1, -1.0, c, a, b, g)?);
        }
        let table = Self { terms };
        table.validate(200, 0x5eed)?;
        Ok(table)
    }

    pub fn terms(&self) -> &[TermSpec] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Sum of the first-channel `+` block (`|Pr|² P`).
    pub fn first_sum(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> Matrix3<f64> {
        self.terms[..6].iter().map(|t| t.matrix(v, vp)).sum()
    }

    /// Sum of the second-channel block (`P r rᵀ P`).
    pub fn second_sum(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> Matrix3<f64> {
        self.terms[6..17].iter().map(|t| t.matrix(v, vp)).sum()
    }

    /// Kernel rebuilt from the table with channel values `g₁`, `g₂`.
    pub fn kernel(&self, g1: f64, g2: f64, v: &Vector3<f64>, vp: &Vector3<f64>) -> Matrix3<f64> {
        let w = [g1 * g1, g2 * g2];
        self.terms.iter().map(|t| t.matrix(v, vp) * (t.sign * w[t.channel - 1])).sum()
    }

    /// Mismatch of both block sums against the geometric forms.
    ///
    /// Each error is relative to the largest individual term in its block,
    /// which bounds the attainable cancellation accuracy.
    pub fn identity_error(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> (f64, f64) {
        let u = v - vp;
        let u2 = u.norm_squared();
        let p = Matrix3::identity() - u * u.transpose() / u2;
        let pr = p * (v + vp);
        let a = p * pr.norm_squared();
        let b = pr * pr.transpose();
        let block = |range: std::ops::Range<usize>, target: Matrix3<f64>| {
            let mut sum = Matrix3::zeros();
            let mut scale = target.amax();
            for t in &self.terms[range] {
                let m = t.matrix(v, vp);
                scale = scale.max(m.amax());
                sum += m;
            }
            (sum - target).amax() / scale.max(f64::MIN_POSITIVE)
        };
        (block(0..6, a), block(6..17, b))
    }

    fn validate(&self, samples: usize, seed: u64) -> Result<()> {
        use rand::{RngExt, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut k = 0;
        while k < samples {
            let v = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            let vp = Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
            if (v - vp).norm() < 1e-3 {
                continue;
            }
            k += 1;
            let (e1, e2) = self.identity_error(&v, &vp);
            if e1 > 1e-12 || e2 > 1e-12 {
                return Err(Error::Numerical(format!(
                    "term table identity failed at v={v:?}, v'={vp:?}: errors {e1:e}, {e2:e}"
                )));
            }
        }
        Ok(())
    }
}
