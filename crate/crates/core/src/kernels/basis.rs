//! Univariate radial basis functions used by separable kernels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A once-differentiable scalar function on `[0, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum UnivariateBasis {
    /// `Σ_k a_k exp(-x² / w_k²)`
    GaussianSum { amplitudes: Vec<f64>, widths: Vec<f64> },
    /// Natural cubic spline through uniform knots on `[0, x_max]`, constant beyond.
    CubicSpline(CubicSpline),
    Constant { value: f64 },
}

impl UnivariateBasis {
    pub fn gaussian(amplitude: f64, width: f64) -> Self {
        Self::GaussianSum { amplitudes: vec![amplitude], widths: vec![width] }
    }

    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GaussianSum { amplitudes, widths } => {
                if amplitudes.len() != widths.len() || amplitudes.is_empty() {
                    return Err(Error::Config(
                        "gaussian-sum needs equally many (>=1) amplitudes and widths".into(),
                    ));
                }
                if widths.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                    return Err(Error::Config("gaussian widths must be positive".into()));
                }
                if amplitudes.iter().any(|a| !a.is_finite()) {
                    return Err(Error::Config("gaussian amplitudes must be finite".into()));
                }
                Ok(())
            }
            Self::CubicSpline(s) => s.validate(),
            Self::Constant { value } => {
                if value.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Config("constant basis value must be finite".into()))
                }
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::GaussianSum { amplitudes, widths } => amplitudes
                .iter()
                .zip(widths)
                .map(|(a, w)| a * (-(x * x) / (w * w)).exp())
                .sum(),
            Self::CubicSpline(s) => s.eval(x),
            Self::Constant { value } => *value,
        }
    }

    /// Tunable parameters in a fixed order (amplitudes then widths, knot values, or the constant).
    pub fn params(&self) -> Vec<f64> {
        match self {
            Self::GaussianSum { amplitudes, widths } => {
                amplitudes.iter().chain(widths).copied().collect()
            }
            Self::CubicSpline(s) => s.values.clone(),
            Self::Constant { value } => vec![*value],
        }
    }

    /// Names matching [`params`](Self::params), used for parameter masks.
    pub fn param_kinds(&self) -> Vec<ParamKind> {
        match self {
            Self::GaussianSum { amplitudes, widths } => std::iter::repeat_n(ParamKind::Amplitude, amplitudes.len())
                .chain(std::iter::repeat_n(ParamKind::Width, widths.len()))
                .collect(),
            Self::CubicSpline(s) => vec![ParamKind::Knot; s.values.len()],
            Self::Constant { .. } => vec![ParamKind::Amplitude],
        }
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let n = self.params().len();
        if p.len() != n {
            return Err(Error::Config(format!("expected {n} basis parameters, got {}", p.len())));
        }
        let out = match self {
            Self::GaussianSum { amplitudes, .. } => {
                let k = amplitudes.len();
                Self::GaussianSum { amplitudes: p[..k].to_vec(), widths: p[k..].to_vec() }
            }
            Self::CubicSpline(s) => Self::CubicSpline(CubicSpline::new(s.x_max, p.to_vec())?),
            Self::Constant { .. } => Self::Constant { value: p[0] },
        };
        out.validate()?;
        Ok(out)
    }

    /// Splits off an overall scale so that proportional bases share a shape.
    ///
    /// Returns `(s, b)` with `self == s * b` pointwise. Zero functions give `s = 0`.
    pub fn split_scale(&self) -> (f64, UnivariateBasis) {
        let (s, shape) = match self {
            Self::GaussianSum { amplitudes, widths } => {
                let s = amplitudes[0];
                if s == 0.0 {
                    (1.0, self.clone())
                } else {
                    let a = amplitudes.iter().map(|a| a / s).collect();
                    (s, Self::GaussianSum { amplitudes: a, widths: widths.clone() })
                }
            }
            Self::CubicSpline(sp) => {
                let s = sp.values.iter().fold(0.0f64, |m, v| if v.abs() > m.abs() { *v } else { m });
                if s == 0.0 {
                    (1.0, self.clone())
                } else {
                    let vals = sp.values.iter().map(|v| v / s).collect();
                    (s, Self::CubicSpline(CubicSpline::new(sp.x_max, vals).expect("rescaled spline")))
                }
            }
            Self::Constant { value } => (*value, Self::Constant { value: 1.0 }),
        };
        (s, shape)
    }

    /// Exact identity key over the defining parameters.
    pub fn key(&self) -> Vec<u64> {
        let mut k = Vec::new();
        match self {
            Self::GaussianSum { amplitudes, widths } => {
                k.push(1);
                k.extend(amplitudes.iter().chain(widths).map(|x| x.to_bits()));
            }
            Self::CubicSpline(s) => {
                k.push(2);
                k.push(s.x_max.to_bits());
                k.extend(s.values.iter().map(|x| x.to_bits()));
            }
            Self::Constant { value } => {
                k.push(3);
                k.push(value.to_bits());
            }
        }
        k
    }
}

/// Role of a basis parameter, for selecting what a fit may move.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ParamKind {
    Amplitude,
    Width,
    Knot,
}

/// Natural cubic spline on uniform knots `x_k = k·x_max/(n-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SplineData", into = "SplineData")]
pub struct CubicSpline {
    x_max: f64,
    values: Vec<f64>,
    second: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SplineData {
    x_max: f64,
    values: Vec<f64>,
}

impl TryFrom<SplineData> for CubicSpline {
    type Error = Error;
    fn try_from(d: SplineData) -> Result<Self> {
        CubicSpline::new(d.x_max, d.values)
    }
}

impl From<CubicSpline> for SplineData {
    fn from(s: CubicSpline) -> Self {
        SplineData { x_max: s.x_max, values: s.values }
    }
}

impl CubicSpline {
    pub fn new(x_max: f64, values: Vec<f64>) -> Result<Self> {
        let mut s = Self { x_max, values, second: Vec::new() };
        s.validate_knots()?;
        s.second = natural_second_derivatives(&s.values, s.step());
        Ok(s)
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn validate_knots(&self) -> Result<()> {
        if !(self.x_max.is_finite() && self.x_max > 0.0) {
            return Err(Error::Config("spline x_max must be positive".into()));
        }
        if self.values.len() < 2 {
            return Err(Error::Config("spline needs at least two knots".into()));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("spline knot values must be finite".into()));
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        self.validate_knots()
    }

    fn step(&self) -> f64 {
        self.x_max / (self.values.len() - 1) as f64
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        if x >= self.x_max {
            return self.values[n - 1];
        }
        let x = x.max(0.0);
        let h = self.step();
        let k = ((x / h) as usize).min(n - 2);
        let t = (x - k as f64 * h) / h;
        let a = 1.0 - t;
        let (y0, y1) = (self.values[k], self.values[k + 1]);
        let (m0, m1) = (self.second[k], self.second[k + 1]);
        a * y0 + t * y1 + ((a * a * a - a) * m0 + (t * t * t - t) * m1) * h * h / 6.0
    }
}

/// Second derivatives of the natural spline (zero at both ends) via the Thomas algorithm.
fn natural_second_derivatives(y: &[f64], h: f64) -> Vec<f64> {
    let n = y.len();
    let mut m = vec![0.0; n];
    if n < 3 {
        return m;
    }
    // interior equations: m_{k-1} + 4 m_k + m_{k+1} = 6 (y_{k+1} - 2y_k + y_{k-1}) / h²
    let k_int = n - 2;
    let mut c = vec![0.0; k_int];
    let mut d = vec![0.0; k_int];
    for i in 0..k_int {
        let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]) / (h * h);
        if i == 0 {
            c[i] = 1.0 / 4.0;
            d[i] = rhs / 4.0;
        } else {
            let denom = 4.0 - c[i - 1];
            c[i] = 1.0 / denom;
            d[i] = (rhs - d[i - 1]) / denom;
        }
    }
    for i in (0..k_int).rev() {
        m[i + 1] = if i + 1 == k_int { d[i] } else { d[i] - c[i] * m[i + 2] };
    }
    m
}
