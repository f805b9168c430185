//! Test functions ψ with gradients and Hessians.

use nalgebra::{Matrix3, Vector3};

/// Radial profiles `φ(r)`, `r = |v|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radial {
    /// `exp(−6r²)`
    Gauss6,
    /// `6r² exp(−1.2r²)`
    Shell,
    /// `exp(−(6r² − 1)²)`
    Ring,
    /// `exp(−(2.5r − 0.2)²)`
    Cone02,
    /// `exp(−(2.5r − 0.5)²)`
    Cone05,
}

impl Radial {
    /// `(φ, φ', φ'')` at `r`.
    fn eval(self, r: f64) -> (f64, f64, f64) {
        let r2 = r * r;
        match self {
            Radial::Gauss6 => {
                let e = (-6.0 * r2).exp();
                (e, -12.0 * r * e, (144.0 * r2 - 12.0) * e)
            }
            Radial::Shell => {
                let e = (-1.2 * r2).exp();
                let p = 6.0 * r2 * e;
                let dp = (12.0 * r - 14.4 * r2 * r) * e;
                let ddp = (12.0 - 43.2 * r2 - 2.4 * r * (12.0 * r - 14.4 * r2 * r)) * e;
                (p, dp, ddp)
            }
            Radial::Ring => {
                let w = 6.0 * r2 - 1.0;
                let e = (-w * w).exp();
                // φ = exp(−w²), w' = 12r, w'' = 12
                let dw = 12.0 * r;
                let d = -2.0 * w * dw * e;
                let dd = (-2.0 * dw * dw - 2.0 * w * 12.0 + 4.0 * w * w * dw * dw) * e;
                (e, d, dd)
            }
            Radial::Cone02 | Radial::Cone05 => {
                let c = if self == Radial::Cone02 { 0.2 } else { 0.5 };
                let w = 2.5 * r - c;
                let e = (-w * w).exp();
                (e, -5.0 * w * e, (-12.5 + 25.0 * w * w) * e)
            }
        }
    }
}

/// A scalar test function on velocity space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Constant(f64),
    /// `v_k`
    Coordinate(usize),
    /// `|v|²`
    SpeedSquared,
    Radial(Radial),
}

impl TestFunction {
    pub fn value(&self, v: &Vector3<f64>) -> f64 {
        match *self {
            TestFunction::Constant(c) => c,
            TestFunction::Coordinate(k) => v[k],
            TestFunction::SpeedSquared => v.norm_squared(),
            TestFunction::Radial(p) => p.eval(v.norm()).0,
        }
    }

    /// `(∇ψ, ∇∇ψ)`.
    ///
    /// At `v = 0` the cone profiles have a kink; the gradient is taken as 0
    /// and the Hessian as `φ''(0) I` there (a null set for continuous samples).
    pub fn derivatives(&self, v: &Vector3<f64>) -> (Vector3<f64>, Matrix3<f64>) {
        match *self {
            TestFunction::Constant(_) => (Vector3::zeros(), Matrix3::zeros()),
            TestFunction::Coordinate(k) => {
                let mut g = Vector3::zeros();
                g[k] = 1.0;
                (g, Matrix3::zeros())
            }
            TestFunction::SpeedSquared => (2.0 * v, 2.0 * Matrix3::identity()),
            TestFunction::Radial(p) => {
                let r = v.norm();
                let (_, d, dd) = p.eval(r);
                if r < 1e-300 {
                    return (Vector3::zeros(), dd * Matrix3::identity());
                }
                let e = v / r;
                let eet = e * e.transpose();
                (d * e, dd * eet + (d / r) * (Matrix3::identity() - eet))
            }
        }
    }
}

/// An ordered collection of test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunctionSet {
    funcs: Vec<TestFunction>,
}

impl TestFunctionSet {
    pub fn new(funcs: Vec<TestFunction>) -> crate::Result<Self> {
        if funcs.is_empty() {
            return Err(crate::Error::Config("test function set is empty".into()));
        }
        Ok(Self { funcs })
    }

    /// The five radial profiles used for training.
    pub fn standard() -> Self {
        Self {
            funcs: [Radial::Gauss6, Radial::Shell, Radial::Ring, Radial::Cone02, Radial::Cone05]
                .into_iter()
                .map(TestFunction::Radial)
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.funcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.funcs.is_empty()
    }

    pub fn funcs(&self) -> &[TestFunction] {
        &self.funcs
    }
}
