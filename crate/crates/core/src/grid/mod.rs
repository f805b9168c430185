//! Cubic velocity grid, nodal fields, and the dual central-difference
//! gradient/divergence pair.
//!
//! Nodes sit at `v = -L/2 + i h` for `i` in `0..N0` along each axis, so the
//! origin is a node whenever `N0` is even. Fields are stored flat with the
//! third index fastest: `idx = (i1 * N0 + i2) * N0 + i3`.

pub mod snapshot;

pub use snapshot::{read_snapshot, write_snapshot, SnapshotHeader};

use nalgebra::Vector3;

use crate::error::{Error, Result};

/// Cubic mesh on `[-L/2, L/2)^3` with `N0` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VelocityGrid {
    extent: f64,
    n0: usize,
    h: f64,
}

impl VelocityGrid {
    /// Builds a grid of side `extent` with `n0` nodes per axis.
    ///
    /// `n0` must be even and at least 4, `extent` finite and positive.
    pub fn new(extent: f64, n0: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::Config(format!("grid extent must be positive, got {extent}")));
        }
        if n0 < 4 {
            return Err(Error::Config(format!("nodes per dimension must be >= 4, got {n0}")));
        }
        if n0 % 2 != 0 {
            return Err(Error::Config(format!("nodes per dimension must be even, got {n0}")));
        }
        Ok(Self { extent, n0, h: extent / n0 as f64 })
    }

    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn n0(&self) -> usize {
        self.n0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// Total node count `N0^3`.
    pub fn len(&self) -> usize {
        self.n0 * self.n0 * self.n0
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^3`.
    pub fn cell_volume(&self) -> f64 {
        self.h * self.h * self.h
    }

    #[inline]
    pub fn index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.n0 + i[1]) * self.n0 + i[2]
    }

    #[inline]
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let n = self.n0;
        [idx / (n * n), (idx / n) % n, idx % n]
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - (self.n0 / 2) as f64) * self.h
    }

    /// Coordinate of an (possibly out-of-range) signed multi-index.
    #[inline]
    pub fn coord_signed(&self, i: [isize; 3]) -> Vector3<f64> {
        let c = |k: isize| (k - (self.n0 / 2) as isize) as f64 * self.h;
        Vector3::new(c(i[0]), c(i[1]), c(i[2]))
    }

    #[inline]
    pub fn coord(&self, i: [usize; 3]) -> Vector3<f64> {
        Vector3::new(self.axis_coord(i[0]), self.axis_coord(i[1]), self.axis_coord(i[2]))
    }

    #[inline]
    pub fn node(&self, idx: usize) -> Vector3<f64> {
        self.coord(self.multi_index(idx))
    }

    /// Inverse of [`coord`](Self::coord): the node at `v`, if `v` lies on one.
    pub fn locate(&self, v: &Vector3<f64>) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for k in 0..3 {
            let x = (v[k] + 0.5 * self.extent) / self.h;
            let r = x.round();
            if (x - r).abs() > 1e-9 || r < 0.0 || r >= self.n0 as f64 {
                return None;
            }
            out[k] = r as usize;
        }
        Some(out)
    }

    /// Multi-index of the node at the origin.
    pub fn origin(&self) -> [usize; 3] {
        let c = self.n0 / 2;
        [c, c, c]
    }

    /// True for nodes off the outermost layer, i.e. all axis indices in `1..N0-1`.
    #[inline]
    pub fn is_interior(&self, i: [usize; 3]) -> bool {
        i.iter().all(|&k| k >= 1 && k + 1 < self.n0)
    }

    /// Per-node `|v|` values in storage order.
    pub fn speeds(&self) -> Vec<f64> {
        (0..self.len()).map(|idx| self.node(idx).norm()).collect()
    }

    /// Flat indices of interior nodes.
    pub fn interior_mask(&self) -> Vec<bool> {
        (0..self.len()).map(|idx| self.is_interior(self.multi_index(idx))).collect()
    }
}

/// Real value per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: VelocityGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: VelocityGrid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_values(grid: VelocityGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite field value at node {pos}")));
        }
        Ok(Self { grid, values })
    }

    /// Samples `func` at every node.
    pub fn from_fn(grid: VelocityGrid, mut func: impl FnMut(&Vector3<f64>) -> f64) -> Self {
        let values = (0..grid.len()).map(|idx| func(&grid.node(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: [usize; 3]) -> f64 {
        self.values[self.grid.index(i)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|x| x.is_finite())
    }

    /// `h^3 * sum(values)`.
    pub fn integral(&self) -> f64 {
        self.grid.cell_volume() * compensated_sum(self.values.iter().copied())
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        debug_assert_eq!(self.grid, other.grid);
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
    }
}

/// 3-vector per grid node.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: VelocityGrid,
    values: Vec<Vector3<f64>>,
}

impl VectorField {
    pub fn zeros(grid: VelocityGrid) -> Self {
        Self { grid, values: vec![Vector3::zeros(); grid.len()] }
    }

    pub fn from_values(grid: VelocityGrid, values: Vec<Vector3<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Config(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: VelocityGrid, mut func: impl FnMut(&Vector3<f64>) -> Vector3<f64>) -> Self {
        let values = (0..grid.len()).map(|idx| func(&grid.node(idx))).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &VelocityGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vector3<f64>] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Vector3<f64>] {
        &mut self.values
    }

    pub fn at(&self, i: [usize; 3]) -> Vector3<f64> {
        self.values[self.grid.index(i)]
    }

    /// Largest component magnitude.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, x| m.max(x.amax()))
    }

    /// Sets every node on the outermost layer to zero.
    pub fn zero_boundary_layer(&mut self) {
        for idx in 0..self.grid.len() {
            if !self.grid.is_interior(self.grid.multi_index(idx)) {
                self.values[idx] = Vector3::zeros();
            }
        }
    }
}

/// How [`d_minus`] and [`d_plus`] obtain values one node outside the domain.
pub enum GhostPolicy<'a, T> {
    /// Out-of-domain neighbors are zero.
    ZeroExtend,
    /// Out-of-domain neighbors repeat the nearest in-domain value.
    CopyBoundary,
    /// Out-of-domain neighbors come from a closure evaluated at the ghost coordinate.
    Analytic(&'a dyn Fn(&Vector3<f64>) -> T),
}

macro_rules! neighbor {
    ($grid:expr, $vals:expr, $ghost:expr, $i:expr, $k:expr, $off:expr, $zero:expr) => {{
        let n0 = $grid.n0() as isize;
        let mut j = [$i[0] as isize, $i[1] as isize, $i[2] as isize];
        j[$k] += $off;
        if j[$k] >= 0 && j[$k] < n0 {
            $vals[$grid.index([j[0] as usize, j[1] as usize, j[2] as usize])]
        } else {
            match $ghost {
                GhostPolicy::ZeroExtend => $zero,
                GhostPolicy::CopyBoundary => $vals[$grid.index($i)],
                GhostPolicy::Analytic(func) => func(&$grid.coord_signed(j)),
            }
        }
    }};
}

/// Central-difference gradient: `(D⁻ψ)_k = [ψ(v + e_k h) − ψ(v − e_k h)] / 2h`.
/// Neumaier summation; keeps grid quadratures at roundoff level for 10⁶+ terms.
pub fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for x in terms {
        let t = s + x;
        c += if s.abs() >= x.abs() { (s - t) + x } else { (x - t) + s };
        s = t;
    }
    s + c
}

pub fn d_minus(field: &ScalarField, ghost: &GhostPolicy<'_, f64>) -> VectorField {
    let grid = *field.grid();
    let vals = field.values();
    let inv2h = 0.5 / grid.spacing();
    let mut out = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let i = grid.multi_index(idx);
        let mut g = Vector3::zeros();
        for k in 0..3 {
            let plus = neighbor!(grid, vals, ghost, i, k, 1, 0.0);
            let minus = neighbor!(grid, vals, ghost, i, k, -1, 0.0);
            g[k] = (plus - minus) * inv2h;
        }
        out.push(g);
    }
    VectorField { grid, values: out }
}

/// Central-difference divergence: `D⁺ξ = Σ_k [ξ_k(v + e_k h) − ξ_k(v − e_k h)] / 2h`.
///
/// With [`GhostPolicy::ZeroExtend`] this is the exact negative adjoint of
/// [`d_minus`] under the `h^3`-weighted inner product.
pub fn d_plus(field: &VectorField, ghost: &GhostPolicy<'_, Vector3<f64>>) -> ScalarField {
    let grid = *field.grid();
    let vals = field.values();
    let inv2h = 0.5 / grid.spacing();
    let mut out = Vec::with_capacity(grid.len());
    for idx in 0..grid.len() {
        let i = grid.multi_index(idx);
        let mut div = 0.0;
        for k in 0..3 {
            let plus = neighbor!(grid, vals, ghost, i, k, 1, Vector3::zeros());
            let minus = neighbor!(grid, vals, ghost, i, k, -1, Vector3::zeros());
            div += (plus[k] - minus[k]) * inv2h;
        }
        out.push(div);
    }
    ScalarField { grid, values: out }
}

/// `h^3`-weighted inner product of scalar fields.
pub fn inner(a: &ScalarField, b: &ScalarField) -> f64 {
    a.grid().cell_volume() * a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum::<f64>()
}

/// `h^3`-weighted inner product of vector fields.
pub fn inner_vec(a: &VectorField, b: &VectorField) -> f64 {
    a.grid().cell_volume() * a.values().iter().zip(b.values()).map(|(x, y)| x.dot(y)).sum::<f64>()
}

/// `D⁻ log max(f, f_min)` with copy-boundary ghosts, shared by both evaluators.
pub fn log_gradient(f: &ScalarField, f_min: f64) -> VectorField {
    let logf = ScalarField {
        grid: *f.grid(),
        values: f.values().iter().map(|&x| x.max(f_min).ln()).collect(),
    };
    d_minus(&logf, &GhostPolicy::CopyBoundary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: VelocityGrid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values = (0..grid.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        ScalarField::from_values(grid, values).unwrap()
    }

    #[test]
    fn make_grid_examples() {
        let g = VelocityGrid::new(8.0, 16).unwrap();
        assert_eq!(g.spacing(), 0.5);
        assert_eq!(g.coord([8, 8, 8]), Vector3::zeros());
        assert_eq!(g.origin(), [8, 8, 8]);

        let g = VelocityGrid::new(8.0, 64).unwrap();
        assert_eq!(g.spacing(), 0.125);
        assert_eq!(g.len(), 64 * 64 * 64);

        assert!(matches!(VelocityGrid::new(8.0, 15), Err(Error::Config(_))));
        assert!(matches!(VelocityGrid::new(0.0, 16), Err(Error::Config(_))));
        assert!(matches!(VelocityGrid::new(-1.0, 16), Err(Error::Config(_))));
        assert!(matches!(VelocityGrid::new(8.0, 2), Err(Error::Config(_))));
    }

    #[test]
    fn index_coordinate_round_trip() {
        let g = VelocityGrid::new(3.0, 12).unwrap();
        for idx in 0..g.len() {
            let i = g.multi_index(idx);
            assert_eq!(g.index(i), idx);
            assert_eq!(g.locate(&g.coord(i)), Some(i));
        }
        assert_eq!(g.locate(&Vector3::new(0.1, 0.0, 0.0)), None);
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let f = ScalarField::from_fn(g, |_| 3.25);
        let d = d_minus(&f, &GhostPolicy::CopyBoundary);
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn gradient_exact_on_quadratics_with_analytic_ghosts() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let psi = |v: &Vector3<f64>| v.norm_squared();
        let f = ScalarField::from_fn(g, psi);
        let d = d_minus(&f, &GhostPolicy::Analytic(&psi));
        for idx in 0..g.len() {
            let v = g.node(idx);
            assert!((d.values()[idx] - 2.0 * v).amax() < 1e-12);
        }
        let affine = |v: &Vector3<f64>| 1.5 * v[0] - 0.25 * v[2] + 2.0;
        let f = ScalarField::from_fn(g, affine);
        let d = d_minus(&f, &GhostPolicy::Analytic(&affine));
        for x in d.values() {
            assert!((x - Vector3::new(1.5, 0.0, -0.25)).amax() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_indicator() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let c = [3usize, 4, 5];
        let mut f = ScalarField::zeros(g);
        f.values_mut()[g.index(c)] = 1.0;
        let d = d_minus(&f, &GhostPolicy::ZeroExtend);
        let s = 1.0 / (2.0 * g.spacing());
        for idx in 0..g.len() {
            let i = g.multi_index(idx);
            let mut expected = Vector3::zeros();
            for k in 0..3 {
                let mut lo = c;
                lo[k] -= 1;
                let mut hi = c;
                hi[k] += 1;
                // node c - e_k sees ψ(c) as its +e_k neighbor
                if i == lo {
                    expected[k] = s;
                }
                if i == hi {
                    expected[k] = -s;
                }
            }
            assert_eq!(d.values()[idx], expected, "node {i:?}");
        }
    }

    #[test]
    fn divergence_of_constant_field() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let xi = VectorField::from_fn(g, |_| Vector3::new(1.0, -2.0, 0.5));
        let div = d_plus(&xi, &GhostPolicy::ZeroExtend);
        let mut boundary_nonzero = false;
        for idx in 0..g.len() {
            let i = g.multi_index(idx);
            if g.is_interior(i) {
                assert_eq!(div.values()[idx], 0.0);
            } else if div.values()[idx] != 0.0 {
                boundary_nonzero = true;
            }
        }
        assert!(boundary_nonzero);
        let zero = VectorField::zeros(g);
        assert_eq!(d_plus(&zero, &GhostPolicy::ZeroExtend).max_abs(), 0.0);
    }

    #[test]
    fn zero_extend_adjointness() {
        let g = VelocityGrid::new(5.0, 10).unwrap();
        let psi = random_field(g, 1);
        let phi = random_field(g, 2);
        let xi = d_minus(&psi, &GhostPolicy::ZeroExtend);
        let lhs = inner(&phi, &d_plus(&xi, &GhostPolicy::ZeroExtend));
        let rhs = -inner_vec(&d_minus(&phi, &GhostPolicy::ZeroExtend), &xi);
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn divergence_telescopes_when_boundary_flux_vanishes() {
        let g = VelocityGrid::new(4.0, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut p = VectorField::from_fn(g, |_| {
            Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>())
        });
        p.zero_boundary_layer();
        let mass = d_plus(&p, &GhostPolicy::ZeroExtend).integral();
        assert!(mass.abs() < 1e-13);
    }
}
