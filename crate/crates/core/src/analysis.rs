//! Diagnostics: moments, entropy, error norms, radial profiles, cubic symmetry
//! and plasma-parameter utilities.

use nalgebra::Vector3;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{compensated_sum, ScalarField, VelocityGrid};

/// Mass, momentum and kinetic energy `½∫|v|² f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mass: f64,
    pub momentum: Vector3<f64>,
    pub energy: f64,
}

pub fn moments(f: &ScalarField) -> Moments {
    let g = f.grid();
    let h3 = g.cell_volume();
    let vals = f.values();
    let weighted = |w: &dyn Fn(&Vector3<f64>) -> f64| {
        h3 * compensated_sum(vals.iter().enumerate().map(|(i, &x)| w(&g.node(i)) * x))
    };
    Moments {
        mass: f.integral(),
        momentum: Vector3::new(weighted(&|v| v[0]), weighted(&|v| v[1]), weighted(&|v| v[2])),
        energy: weighted(&|v| 0.5 * v.norm_squared()),
    }
}

/// `S = −h³ Σ f log max(f, f_min)`.
pub fn entropy(f: &ScalarField, f_min: f64) -> f64 {
    -f.grid().cell_volume() * compensated_sum(f.values().iter().map(|&x| x * x.max(f_min).ln()))
}

/// Relative L₁, L₂, L∞ differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

/// Subsamples `f` onto a coarser grid whose nodes are a subset of the fine nodes.
pub fn restrict(f: &ScalarField, coarse: &VelocityGrid) -> Result<ScalarField> {
    let fine = f.grid();
    if (fine.extent() - coarse.extent()).abs() > 1e-12 * fine.extent() {
        return Err(Error::Config("grids have different extents".into()));
    }
    if fine.n0() % coarse.n0() != 0 {
        return Err(Error::Config(format!(
            "grids are not nested: {} is not a multiple of {}",
            fine.n0(),
            coarse.n0()
        )));
    }
    let r = fine.n0() / coarse.n0();
    let vals = (0..coarse.len())
        .map(|idx| {
            let i = coarse.multi_index(idx);
            f.at([i[0] * r, i[1] * r, i[2] * r])
        })
        .collect();
    ScalarField::from_values(*coarse, vals)
}

/// Errors of `f` against `f_ref` on the nodes the two grids share.
///
/// `f_ref` must live on a grid of the same extent whose `N0` is a multiple of `f`'s.
pub fn relative_errors(f: &ScalarField, f_ref: &ScalarField) -> Result<ErrorNorms> {
    let r = restrict(f_ref, f.grid())?;
    let (mut d1, mut d2, mut dinf) = (0.0f64, 0.0f64, 0.0f64);
    let (mut r1, mut r2, mut rinf) = (0.0f64, 0.0f64, 0.0f64);
    for (a, b) in f.values().iter().zip(r.values()) {
        let d = (a - b).abs();
        d1 += d;
        d2 += d * d;
        dinf = dinf.max(d);
        r1 += b.abs();
        r2 += b * b;
        rinf = rinf.max(b.abs());
    }
    if r1 == 0.0 {
        return Err(Error::Numerical("reference field is zero on the shared nodes".into()));
    }
    Ok(ErrorNorms { l1: d1 / r1, l2: (d2 / r2).sqrt(), linf: dinf / rinf })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadialBin {
    pub center: f64,
    pub f: f64,
    /// `center · f`
    pub vf: f64,
    pub count: usize,
}

/// Shell means of `f` over bins `[k w, (k+1) w)`; empty bins are omitted.
pub fn radial_profile(f: &ScalarField, bin_width: f64) -> Result<Vec<RadialBin>> {
    if !(bin_width > 0.0) {
        return Err(Error::Config("bin width must be positive".into()));
    }
    let g = f.grid();
    let mut sums: Vec<(f64, usize)> = Vec::new();
    for (i, &x) in f.values().iter().enumerate() {
        let k = (g.node(i).norm() / bin_width) as usize;
        if sums.len() <= k {
            sums.resize(k + 1, (0.0, 0));
        }
        sums[k].0 += x;
        sums[k].1 += 1;
    }
    Ok(sums
        .into_iter()
        .enumerate()
        .filter(|(_, (_, c))| *c > 0)
        .map(|(k, (s, c))| {
            let center = (k as f64 + 0.5) * bin_width;
            let mean = s / c as f64;
            RadialBin { center, f: mean, vf: center * mean, count: c }
        })
        .collect())
}

/// The 48 signed axis permutations `(perm, flip)`.
fn cubic_group() -> Vec<([usize; 3], [bool; 3])> {
    let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mut out = Vec::with_capacity(48);
    for p in perms {
        for s in 0..8u8 {
            out.push((p, [s & 1 != 0, s & 2 != 0, s & 4 != 0]));
        }
    }
    out
}

/// `max_R ‖f∘R − f‖∞ / ‖f‖∞` over the cubic group.
///
/// Only nodes with every index `≥ 1` are compared: their images under sign
/// flips `i ↦ N0 − i` stay on the grid.
pub fn cubic_symmetry_deviation(f: &ScalarField) -> f64 {
    let g = f.grid();
    let n = g.n0();
    let norm = f.max_abs();
    if norm == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for (perm, flip) in cubic_group() {
        for idx in 0..g.len() {
            let i = g.multi_index(idx);
            if i.contains(&0) {
                continue;
            }
            let mut j = [i[perm[0]], i[perm[1]], i[perm[2]]];
            for k in 0..3 {
                if flip[k] {
                    j[k] = n - j[k];
                }
            }
            worst = worst.max((f.at(j) - f.values()[idx]).abs());
        }
    }
    worst / norm
}

pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
pub const VACUUM_PERMITTIVITY: f64 = 8.854_187_8128e-12;
pub const BOLTZMANN: f64 = 1.380_649e-23;
pub const PROTON_MASS: f64 = 1.672_621_923_69e-27;

/// SI plasma parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalParams {
    pub charge: f64,
    pub permittivity: f64,
    pub boltzmann: f64,
    pub temperature: f64,
    pub density: f64,
    pub mass: f64,
}

impl PhysicalParams {
    pub fn new(charge: f64, permittivity: f64, boltzmann: f64, temperature: f64, density: f64, mass: f64) -> Result<Self> {
        let p = Self { charge, permittivity, boltzmann, temperature, density, mass };
        let all = [charge, permittivity, boltzmann, temperature, density, mass];
        if all.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return Err(Error::Config("physical parameters must be positive".into()));
        }
        Ok(p)
    }

    /// Monovalent one-component plasma of `count` particles in a cube of side `box_side` (m),
    /// with the temperature implied by a reduced 3-D velocity variance.
    pub fn one_component_plasma(count: f64, box_side: f64, mass: f64, reduced_variance: f64) -> Result<Self> {
        let density = count / box_side.powi(3);
        let mut p = Self::new(ELEMENTARY_CHARGE, VACUUM_PERMITTIVITY, BOLTZMANN, 1.0, density, mass)?;
        let v0 = p.scales().v0;
        p.temperature = mass * v0 * v0 * reduced_variance / (3.0 * BOLTZMANN);
        Self::new(p.charge, p.permittivity, p.boltzmann, p.temperature, p.density, p.mass)
    }

    pub fn scales(&self) -> CharacteristicScales {
        characteristic_scales(self)
    }
}

/// `Γ = q² / (4π ε₀ k_B T) · (4π n / 3)^{1/3}`.
pub fn coupling_parameter(p: &PhysicalParams) -> f64 {
    p.charge * p.charge / (4.0 * std::f64::consts::PI * p.permittivity * p.boltzmann * p.temperature)
        * (4.0 * std::f64::consts::PI * p.density / 3.0).cbrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicScales {
    /// `a ω_p` (m/s)
    pub v0: f64,
    /// `1/ω_p` (s)
    pub t0: f64,
    /// Wigner–Seitz radius (m)
    pub a: f64,
    /// plasma frequency (rad/s)
    pub omega_p: f64,
}

pub fn characteristic_scales(p: &PhysicalParams) -> CharacteristicScales {
    let a = (3.0 / (4.0 * std::f64::consts::PI * p.density)).cbrt();
    let omega_p = (p.density * p.charge * p.charge / (p.mass * p.permittivity)).sqrt();
    CharacteristicScales { v0: a * omega_p, t0: 1.0 / omega_p, a, omega_p }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> VelocityGrid {
        VelocityGrid::new(8.0, 32).unwrap()
    }

    fn maxwellian(g: VelocityGrid, t: f64) -> ScalarField {
        let mut f = ScalarField::from_fn(g, |v| (-v.norm_squared() / (2.0 * t)).exp());
        let m = f.integral();
        f.scale(1.0 / m);
        f
    }

    #[test]
    fn maxwellian_moments() {
        let t = 0.5;
        let m = moments(&maxwellian(grid(), t));
        assert!((m.mass - 1.0).abs() < 1e-15);
        // the unpaired −L/2 face leaves an exp(−L²/8T)-sized residue
        assert!(m.momentum.amax() < 1e-5);
        assert!((m.energy - 1.5 * t).abs() < 1e-3);
    }

    #[test]
    fn shift_by_one_node_moves_momentum_by_h() {
        let g = grid();
        let f = ScalarField::from_fn(g, |v| (-(v.norm_squared()) / 0.2).exp());
        let mut vals = vec![0.0; g.len()];
        for idx in 0..g.len() {
            let i = g.multi_index(idx);
            if i[0] + 1 < g.n0() {
                vals[g.index([i[0] + 1, i[1], i[2]])] = f.values()[idx];
            }
        }
        let shifted = ScalarField::from_values(g, vals).unwrap();
        let (a, b) = (moments(&f), moments(&shifted));
        assert!((b.momentum[0] - a.momentum[0] - g.spacing() * a.mass).abs() < 1e-14);
    }

    #[test]
    fn entropy_examples() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let l3 = 64.0;
        let u = ScalarField::from_fn(g, |_| 1.0 / l3);
        assert!((entropy(&u, 1e-16) - l3.ln()).abs() < 1e-12);

        let f = maxwellian(g, 0.3);
        let mut f2 = f.clone();
        f2.scale(2.0);
        // S(2f) = 2 S(f) − 2 log 2 · m(f)
        let lhs = entropy(&f2, 1e-300);
        let rhs = 2.0 * entropy(&f, 1e-300) - 2.0 * 2f64.ln() * f.integral();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn relative_error_examples() {
        let fine = VelocityGrid::new(4.0, 16).unwrap();
        let coarse = VelocityGrid::new(4.0, 8).unwrap();
        let fr = maxwellian(fine, 0.4);
        let fc = restrict(&fr, &coarse).unwrap();
        let e = relative_errors(&fc, &fr).unwrap();
        assert_eq!((e.l1, e.l2, e.linf), (0.0, 0.0, 0.0));
        let mut p = fc.clone();
        p.scale(1.0 + 1e-3);
        let e = relative_errors(&p, &fr).unwrap();
        for x in [e.l1, e.l2, e.linf] {
            assert!((x - 1e-3).abs() < 1e-15);
        }
        let odd = VelocityGrid::new(4.0, 6).unwrap();
        assert!(relative_errors(&ScalarField::zeros(odd), &fr).is_err());
    }

    #[test]
    fn profile_of_maxwellian_follows_formula() {
        let g = grid();
        let t = 0.4;
        let f = ScalarField::from_fn(g, |v| (-v.norm_squared() / (2.0 * t)).exp());
        let prof = radial_profile(&f, g.spacing()).unwrap();
        for b in prof.iter().filter(|b| b.center < 2.0) {
            let exact = (-b.center * b.center / (2.0 * t)).exp();
            assert!((b.f - exact).abs() < 2.0 * g.spacing(), "{b:?}");
            assert!((b.vf - b.center * b.f).abs() < 1e-15);
        }
        let aniso = ScalarField::from_fn(g, |v| (-v[0] * v[0] - 3.0 * v[1] * v[1]).exp());
        assert!(radial_profile(&aniso, 0.3).unwrap().iter().all(|b| b.f.is_finite()));
    }

    #[test]
    fn symmetry_deviation() {
        let g = grid();
        let f = ScalarField::from_fn(g, |v| (-v.norm_squared()).exp());
        assert_eq!(cubic_symmetry_deviation(&f), 0.0);
        let drift = ScalarField::from_fn(g, |v| (-(v - Vector3::new(0.05, 0.0, 0.0)).norm_squared()).exp());
        let d = cubic_symmetry_deviation(&drift);
        assert!(d > 0.02 && d < 0.2, "{d}");
        assert_eq!(cubic_group().len(), 48);
    }

    #[test]
    fn plasma_regime() {
        let p = PhysicalParams::one_component_plasma(1e6, 100e-10, PROTON_MASS, 0.433).unwrap();
        let gamma = coupling_parameter(&p);
        assert!((gamma / 2.3 - 1.0).abs() < 0.05, "{gamma}");
        let s = p.scales();
        assert!((s.v0 / 81700.0 - 1.0).abs() < 0.01, "{}", s.v0);
        assert!((s.t0 / 0.76e-15 - 1.0).abs() < 0.05, "{}", s.t0);
        let mut hot = p;
        hot.temperature *= 2.0;
        assert!((coupling_parameter(&hot) - gamma / 2.0).abs() < 1e-12 * gamma);
    }
}
