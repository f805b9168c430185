//! Two-channel spectrally separable kernels.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::basis::UnivariateBasis;
use super::{CollisionKernel, KernelMatrix};
use crate::error::{Error, Result};

/// Current fitted-kernel file revision.
pub const KERNEL_FORMAT: &str = "sscoll-kernel/1";

/// One mode triplet `(ℒ, ℳ, 𝒩)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mode {
    #[serde(rename = "L")]
    pub l: UnivariateBasis,
    #[serde(rename = "M")]
    pub m: UnivariateBasis,
    #[serde(rename = "N")]
    pub n: UnivariateBasis,
}

impl Mode {
    pub fn new(l: UnivariateBasis, m: UnivariateBasis, n: UnivariateBasis) -> Self {
        Self { l, m, n }
    }
}

/// One expanded separable term `L(|u|) M(|v|) N(|v'|)`.
#[derive(Debug, Clone, Copy)]
pub struct ExpandedMode<'a> {
    pub l: &'a UnivariateBasis,
    pub m: &'a UnivariateBasis,
    pub n: &'a UnivariateBasis,
}

/// Separable kernel
///
/// `g_c(|u|,|v|,|v'|) = Σ_j ℒ_j(|u|) [ℳ_j(|v|) 𝒩_j(|v'|) + 𝒩_j(|v|) ℳ_j(|v'|)]`
///
/// for channels `c = 1, 2`, assembled into
/// `ω = g₁² |Pr|² P + (g₂² − g₁²) P r rᵀ P` with `u = v − v'`, `r = v + v'`.
#[derive(Debug, Clone, PartialEq)]
pub struct SsKernel {
    name: String,
    channels: [Vec<Mode>; 2],
    u_eps: f64,
}

#[derive(Serialize, Deserialize)]
struct KernelFile {
    format: String,
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    u_eps: Option<f64>,
    channel1: Vec<Mode>,
    channel2: Vec<Mode>,
}

impl SsKernel {
    pub fn new(name: impl Into<String>, channel1: Vec<Mode>, channel2: Vec<Mode>) -> Result<Self> {
        let k = Self { name: name.into(), channels: [channel1, channel2], u_eps: 1e-12 };
        k.validate()?;
        Ok(k)
    }

    fn validate(&self) -> Result<()> {
        if self.channels.iter().all(|c| c.is_empty()) {
            return Err(Error::Config("separable kernel needs at least one mode".into()));
        }
        for mode in self.channels.iter().flatten() {
            mode.l.validate()?;
            mode.m.validate()?;
            mode.n.validate()?;
        }
        Ok(())
    }

    pub fn with_u_eps(mut self, u_eps: f64) -> Self {
        self.u_eps = u_eps;
        self
    }

    pub fn u_eps(&self) -> f64 {
        self.u_eps
    }

    pub fn modes(&self, channel: usize) -> &[Mode] {
        &self.channels[channel - 1]
    }

    /// The `J = 2J'` expanded triplets of a channel, in pairing order.
    pub fn expanded(&self, channel: usize) -> Vec<ExpandedMode<'_>> {
        self.modes(channel)
            .iter()
            .flat_map(|md| {
                [
                    ExpandedMode { l: &md.l, m: &md.m, n: &md.n },
                    ExpandedMode { l: &md.l, m: &md.n, n: &md.m },
                ]
            })
            .collect()
    }

    /// Channel function `g_c`, exactly symmetric in its last two arguments.
    pub fn eval_g(&self, channel: usize, u: f64, v: f64, vp: f64) -> f64 {
        self.modes(channel)
            .iter()
            .map(|md| {
                let a = md.m.eval(v) * md.n.eval(vp);
                let b = md.n.eval(v) * md.m.eval(vp);
                md.l.eval(u) * (a + b)
            })
            .sum()
    }

    /// Separated form; zero for `|u| < u_eps`.
    pub fn eval_kernel_separated(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> KernelMatrix {
        let u = v - vp;
        let u2 = u.norm_squared();
        let un = u2.sqrt();
        if un < self.u_eps {
            return Matrix3::zeros();
        }
        let r = v + vp;
        let p = projector(&u, u2);
        let pr = &p * r;
        let pr2 = pr.norm_squared();
        let (vn, vpn) = (v.norm(), vp.norm());
        let g1 = self.eval_g(1, un, vn, vpn);
        let g2 = self.eval_g(2, un, vn, vpn);
        let g1s = g1 * g1;
        p * (g1s * pr2) + (pr * pr.transpose()) * (g2 * g2 - g1s)
    }

    /// Geometric form `P (g_r² r̃r̃ᵀ + g_s² s̃s̃ᵀ) P`, for cross-validation.
    pub fn eval_kernel_geometric(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> Result<KernelMatrix> {
        let u = v - vp;
        let u2 = u.norm_squared();
        let un = u2.sqrt();
        if un < self.u_eps {
            return Err(Error::DegenerateGeometry(format!("|u| = {un:e} below threshold")));
        }
        let r = v + vp;
        let p = projector(&u, u2);
        let pr = &p * r;
        let prn = pr.norm();
        let s = u.cross(&r);
        let sn = s.norm();
        if prn < self.u_eps || sn == 0.0 {
            return Err(Error::DegenerateGeometry(format!("|Pr| = {prn:e} below threshold")));
        }
        let rt = pr / prn;
        let st = s / sn;
        let (vn, vpn) = (v.norm(), vp.norm());
        let g1 = self.eval_g(1, un, vn, vpn);
        let g2 = self.eval_g(2, un, vn, vpn);
        let gs2 = g1 * g1 * prn * prn;
        let gr2 = g2 * g2 * prn * prn;
        Ok(&p * (rt * rt.transpose() * gr2 + st * st.transpose() * gs2) * &p)
    }

    /// Flattened basis parameters over all modes, channel 1 first, then `L, M, N` per mode.
    pub fn params(&self) -> Vec<f64> {
        self.channels
            .iter()
            .flatten()
            .flat_map(|md| [md.l.params(), md.m.params(), md.n.params()].concat())
            .collect()
    }

    /// Parameter descriptors aligned with [`params`](Self::params).
    pub fn param_layout(&self) -> Vec<ParamSlot> {
        let mut out = Vec::new();
        for (c, modes) in self.channels.iter().enumerate() {
            for (j, md) in modes.iter().enumerate() {
                for (factor, b) in [(Factor::L, &md.l), (Factor::M, &md.m), (Factor::N, &md.n)] {
                    for kind in b.param_kinds() {
                        out.push(ParamSlot { channel: c + 1, mode: j, factor, kind });
                    }
                }
            }
        }
        out
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        let expected = self.params().len();
        if p.len() != expected {
            return Err(Error::Config(format!("expected {expected} kernel parameters, got {}", p.len())));
        }
        let mut off = 0;
        let mut take = |b: &UnivariateBasis| -> Result<UnivariateBasis> {
            let n = b.params().len();
            let nb = b.with_params(&p[off..off + n])?;
            off += n;
            Ok(nb)
        };
        let mut channels: [Vec<Mode>; 2] = [Vec::new(), Vec::new()];
        for (c, modes) in self.channels.iter().enumerate() {
            for md in modes {
                let l = take(&md.l)?;
                let m = take(&md.m)?;
                let n = take(&md.n)?;
                channels[c].push(Mode { l, m, n });
            }
        }
        Ok(Self { name: self.name.clone(), channels, u_eps: self.u_eps })
    }

    pub fn to_json(&self) -> Result<String> {
        let file = KernelFile {
            format: KERNEL_FORMAT.to_string(),
            name: Some(self.name.clone()),
            u_eps: Some(self.u_eps),
            channel1: self.channels[0].clone(),
            channel2: self.channels[1].clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let file: KernelFile = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Format(format!("kernel file: {} at {}", e.inner(), e.path())))?;
        if file.format != KERNEL_FORMAT {
            return Err(Error::Format(format!(
                "unsupported kernel format '{}' (expected '{KERNEL_FORMAT}')",
                file.format
            )));
        }
        let k = Self::new(file.name.unwrap_or_else(|| "fitted".into()), file.channel1, file.channel2)?;
        Ok(match file.u_eps {
            Some(e) => k.with_u_eps(e),
            None => k,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factor {
    L,
    M,
    N,
}

/// Location of one scalar kernel parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamSlot {
    pub channel: usize,
    pub mode: usize,
    pub factor: Factor,
    pub kind: super::basis::ParamKind,
}

impl CollisionKernel for SsKernel {
    fn omega(&self, v: &Vector3<f64>, vp: &Vector3<f64>) -> KernelMatrix {
        self.eval_kernel_separated(v, vp)
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn as_ss(&self) -> Option<&SsKernel> {
        Some(self)
    }
}

#[inline]
pub(crate) fn projector(u: &Vector3<f64>, u2: f64) -> Matrix3<f64> {
    Matrix3::identity() - u * u.transpose() / u2
}
