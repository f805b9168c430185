//! Forward-Euler integration of `∂f/∂t = Q(f)` with `dt = c h²`, per-step
//! diagnostics and snapshots.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::analysis::{entropy, moments, relative_errors, restrict, ErrorNorms};
use crate::direct::{collision_rhs_direct, DEFAULT_LOG_FLOOR};
use crate::error::{Error, Result};
use crate::fast::{collision_rhs_fast, ConvolutionPlan, TermTable};
use crate::grid::{ScalarField, VelocityGrid};
use crate::initcond::InitialCondition;
use crate::kernels::{builtin, CollisionKernel, SsKernel};

pub const DEFAULT_DT_COEFFICIENT: f64 = 0.1;
pub const DEFAULT_NEGATIVITY_TOL: f64 = 1e-12;
/// Abort once `‖f‖∞` exceeds this multiple of its initial value.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluatorKind {
    Direct,
    #[default]
    Fast,
}

impl std::str::FromStr for EvaluatorKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "direct" => Ok(Self::Direct),
            "fast" => Ok(Self::Fast),
            other => Err(Error::Config(format!("unknown evaluator {other:?} (direct | fast)"))),
        }
    }
}

fn default_c() -> f64 {
    DEFAULT_DT_COEFFICIENT
}
fn default_kernel() -> String {
    "gaussian_ss".into()
}
fn default_f_min() -> f64 {
    DEFAULT_LOG_FLOOR
}
fn default_neg_tol() -> f64 {
    DEFAULT_NEGATIVITY_TOL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub end_time: f64,
    #[serde(default = "default_c")]
    pub dt_coefficient: f64,
    /// Times in `[0, end_time]` at which `f` is kept.
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub evaluator: EvaluatorKind,
    /// Built-in kernel name or path to a kernel JSON file.
    #[serde(default = "default_kernel")]
    pub kernel: String,
    #[serde(default = "default_f_min")]
    pub f_min: f64,
    #[serde(default = "default_neg_tol")]
    pub negativity_tol: f64,
}

impl RunConfig {
    pub fn new(end_time: f64) -> Self {
        Self {
            end_time,
            dt_coefficient: DEFAULT_DT_COEFFICIENT,
            snapshots: Vec::new(),
            evaluator: EvaluatorKind::default(),
            kernel: default_kernel(),
            f_min: DEFAULT_LOG_FLOOR,
            negativity_tol: DEFAULT_NEGATIVITY_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.end_time >= 0.0 && self.end_time.is_finite()) {
            return Err(Error::Config(format!("end time must be finite and non-negative, got {}", self.end_time)));
        }
        if !(self.dt_coefficient > 0.0 && self.dt_coefficient.is_finite()) {
            return Err(Error::Config(format!("dt coefficient must be positive, got {}", self.dt_coefficient)));
        }
        if let Some(t) = self.snapshots.iter().find(|t| !(**t >= 0.0 && **t <= self.end_time)) {
            return Err(Error::Config(format!("snapshot time {t} outside [0, {}]", self.end_time)));
        }
        if !(self.f_min > 0.0) {
            return Err(Error::Config("f_min must be positive".into()));
        }
        if !(self.negativity_tol >= 0.0) {
            return Err(Error::Config("negativity tolerance must be non-negative".into()));
        }
        Ok(())
    }

    pub fn dt(&self, grid: &VelocityGrid) -> f64 {
        self.dt_coefficient * grid.spacing() * grid.spacing()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let c: Self =
            serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("run config at {}: {}", e.path(), e.inner())))?;
        c.validate()?;
        Ok(c)
    }
}

/// Something that evaluates `Q(f)` on a fixed grid.
pub trait RhsEvaluator: Send + Sync {
    fn rhs(&self, f: &ScalarField) -> Result<ScalarField>;
    fn name(&self) -> &str;
}

pub struct DirectEvaluator {
    kernel: Arc<dyn CollisionKernel>,
    f_min: f64,
}

impl DirectEvaluator {
    pub fn new(kernel: Arc<dyn CollisionKernel>, f_min: f64) -> Self {
        Self { kernel, f_min }
    }
}

impl RhsEvaluator for DirectEvaluator {
    fn rhs(&self, f: &ScalarField) -> Result<ScalarField> {
        Ok(collision_rhs_direct(f, self.kernel.as_ref(), self.f_min))
    }
    fn name(&self) -> &str {
        "direct"
    }
}

pub struct FastEvaluator {
    plan: ConvolutionPlan,
    f_min: f64,
}

impl FastEvaluator {
    pub fn new(grid: &VelocityGrid, kernel: &SsKernel, f_min: f64) -> Result<Self> {
        let table = TermTable::build()?;
        Ok(Self { plan: ConvolutionPlan::new(grid, kernel, &table)?, f_min })
    }

    pub fn plan(&self) -> &ConvolutionPlan {
        &self.plan
    }
}

impl RhsEvaluator for FastEvaluator {
    fn rhs(&self, f: &ScalarField) -> Result<ScalarField> {
        if f.grid() != self.plan.grid() {
            return Err(Error::Config("field grid differs from the planned grid".into()));
        }
        collision_rhs_fast(f, &self.plan, self.f_min)
    }
    fn name(&self) -> &str {
        "fast"
    }
}

/// # Errors
/// [`Error::DirectOnly`] when `kind` is fast and the kernel is not separable.
pub fn make_evaluator(
    kind: EvaluatorKind,
    kernel: Arc<dyn CollisionKernel>,
    grid: &VelocityGrid,
    f_min: f64,
) -> Result<Box<dyn RhsEvaluator>> {
    match kind {
        EvaluatorKind::Direct => Ok(Box::new(DirectEvaluator::new(kernel, f_min))),
        EvaluatorKind::Fast => match kernel.as_ss() {
            Some(ss) => Ok(Box::new(FastEvaluator::new(grid, ss, f_min)?)),
            None => Err(Error::DirectOnly(kernel.name().to_string())),
        },
    }
}

/// `f + dt·Q(f)`.
pub fn step_euler(f: &ScalarField, dt: f64, rhs: &dyn RhsEvaluator) -> Result<ScalarField> {
    if !f.is_finite() {
        return Err(Error::Numerical("state is not finite".into()));
    }
    let q = rhs.rhs(f)?;
    if !q.is_finite() {
        return Err(Error::Numerical("collision rhs is not finite".into()));
    }
    let mut next = f.clone();
    next.axpy(dt, &q);
    Ok(next)
}

/// One row of the per-step log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StepRecord {
    pub time: f64,
    pub mass: f64,
    pub px: f64,
    pub py: f64,
    pub pz: f64,
    pub energy: f64,
    pub entropy: f64,
    pub min_f: f64,
    /// `h³ Σ max(−f, 0)` when `min f` is below the negativity tolerance, else 0.
    #[serde(skip)]
    pub clipped_mass: f64,
}

impl StepRecord {
    pub fn of(f: &ScalarField, time: f64, f_min: f64, negativity_tol: f64) -> Self {
        let m = moments(f);
        let min_f = f.min();
        let clipped_mass = if min_f < -negativity_tol {
            f.grid().cell_volume() * f.values().iter().map(|x| (-x).max(0.0)).sum::<f64>()
        } else {
            0.0
        };
        Self {
            time,
            mass: m.mass,
            px: m.momentum[0],
            py: m.momentum[1],
            pz: m.momentum[2],
            energy: m.energy,
            entropy: entropy(f, f_min),
            min_f,
            clipped_mass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub records: Vec<StepRecord>,
    /// `(time, f)` at `t = 0`, every requested time and the end time.
    pub snapshots: Vec<(f64, ScalarField)>,
    pub final_state: ScalarField,
    pub dt: f64,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&ScalarField> {
        self.snapshots.iter().find(|(s, _)| (s - t).abs() <= 1e-12 * t.abs().max(1.0)).map(|(_, f)| f)
    }

    /// Largest relative drift of mass and energy, and momentum drift relative to `√energy`.
    pub fn conservation_drift(&self) -> ConservationDrift {
        let r0 = self.records[0];
        let mut d = ConservationDrift::default();
        let p_scale = r0.energy.abs().sqrt();
        for r in &self.records {
            d.mass = d.mass.max((r.mass - r0.mass).abs() / r0.mass.abs());
            d.energy = d.energy.max((r.energy - r0.energy).abs() / r0.energy.abs());
            for (k, (a, b)) in [(r.px, r0.px), (r.py, r0.py), (r.pz, r0.pz)].into_iter().enumerate() {
                d.momentum[k] = d.momentum[k].max((a - b).abs() / p_scale);
            }
        }
        d
    }

    /// Steps where entropy fell, with the size of the drop.
    pub fn entropy_decreases(&self) -> Vec<(usize, f64)> {
        self.records
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].entropy < w[0].entropy)
            .map(|(i, w)| (i + 1, w[0].entropy - w[1].entropy))
            .collect()
    }

    pub fn negativity_events(&self) -> usize {
        self.records.iter().filter(|r| r.clipped_mass > 0.0).count()
    }

    pub fn write_diagnostics_csv(&self, path: &Path) -> Result<()> {
        write_diagnostics_csv(path, &self.records)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ConservationDrift {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl ConservationDrift {
    pub fn worst(&self) -> f64 {
        self.momentum.iter().copied().fold(self.mass.max(self.energy), f64::max)
    }
}

pub fn write_diagnostics_csv(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

/// A run that stopped early.
#[derive(Debug)]
pub struct RunFailure {
    pub error: Error,
    /// Everything recorded before the failing step.
    pub partial: Trajectory,
    /// The state the failing step started from.
    pub last_state: ScalarField,
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let t = self.partial.records.last().map_or(0.0, |r| r.time);
        write!(f, "run aborted at t = {t}: {}", self.error)
    }
}

impl std::error::Error for RunFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

/// Builds the kernel and evaluator named in `config`, then integrates.
pub fn run(f0: &ScalarField, config: &RunConfig) -> std::result::Result<Trajectory, RunFailure> {
    let setup = || -> Result<Box<dyn RhsEvaluator>> {
        config.validate()?;
        let kernel = builtin::resolve(&config.kernel)?;
        make_evaluator(config.evaluator, kernel, f0.grid(), config.f_min)
    };
    match setup() {
        Ok(eval) => run_with(f0, config, eval.as_ref(), |_| {}),
        Err(error) => Err(RunFailure {
            error,
            partial: single_state(f0, config),
            last_state: f0.clone(),
        }),
    }
}

fn single_state(f0: &ScalarField, config: &RunConfig) -> Trajectory {
    Trajectory {
        records: vec![StepRecord::of(f0, 0.0, config.f_min, config.negativity_tol)],
        snapshots: vec![(0.0, f0.clone())],
        final_state: f0.clone(),
        dt: config.dt(f0.grid()),
    }
}

/// Integrates to `config.end_time`, calling `observe` after every step.
///
/// Steps have length `c h²` except the ones shortened to land exactly on a
/// snapshot or the end time.
pub fn run_with(
    f0: &ScalarField,
    config: &RunConfig,
    eval: &dyn RhsEvaluator,
    mut observe: impl FnMut(&StepRecord),
) -> std::result::Result<Trajectory, RunFailure> {
    let mut traj = single_state(f0, config);
    let fail = |error: Error, traj: Trajectory, last: &ScalarField| RunFailure { error, partial: traj, last_state: last.clone() };
    if let Err(e) = config.validate() {
        return Err(fail(e, traj, f0));
    }
    let mass = traj.records[0].mass;
    if (mass - 1.0).abs() > 1e-10 {
        return Err(fail(Error::Config(format!("initial field must have unit mass, got {mass}")), traj, f0));
    }
    let dt = traj.dt;
    let mut stops: Vec<f64> = config.snapshots.iter().copied().filter(|&t| t > 0.0).collect();
    stops.push(config.end_time);
    stops.sort_by(f64::total_cmp);
    stops.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));

    let limit = BLOWUP_FACTOR * f0.max_abs();
    let mut f = f0.clone();
    let mut t = 0.0;
    for &stop in &stops {
        while stop - t > 1e-12 * stop.max(1.0) {
            let h = dt.min(stop - t);
            let next = match step_euler(&f, h, eval) {
                Ok(n) => n,
                Err(e) => return Err(fail(e, traj, &f)),
            };
            t = if stop - t <= dt { stop } else { t + h };
            let rec = StepRecord::of(&next, t, config.f_min, config.negativity_tol);
            traj.records.push(rec);
            observe(&rec);
            if next.max_abs() > limit {
                let e = Error::Numerical(format!(
                    "blow-up: max |f| = {:e} exceeds {BLOWUP_FACTOR:e} times its initial value (dt = {dt:e}; reduce the dt coefficient)",
                    next.max_abs()
                ));
                return Err(fail(e, traj, &next));
            }
            f = next;
        }
        traj.snapshots.push((stop, f.clone()));
    }
    if config.end_time == 0.0 {
        traj.snapshots.truncate(1);
    }
    traj.final_state = f;
    Ok(traj)
}

/// Writes snapshots as `<stem>_t<time>.<ext>` into `dir`.
pub fn write_snapshots(traj: &Trajectory, dir: &Path, ext: &str) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (t, f) in &traj.snapshots {
        let p = dir.join(format!("snapshot_t{t:.6}.{ext}"));
        crate::grid::write_snapshot(&p, f, *t)?;
        out.push(p);
    }
    let mut index = std::fs::File::create(dir.join("snapshots.txt"))?;
    for (p, (t, _)) in out.iter().zip(&traj.snapshots) {
        writeln!(index, "{t} {}", p.file_name().and_then(|s| s.to_str()).unwrap_or_default())?;
    }
    Ok(out)
}

/// Errors of one mesh against the reference solution at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshError {
    pub time: f64,
    pub n0: usize,
    pub h: f64,
    /// Nodes per axis of the lattice shared with the reference mesh.
    pub shared_n0: usize,
    /// On the nodes shared with the reference mesh; all of the mesh's own
    /// nodes when the reference refines it.
    pub own: ErrorNorms,
    /// On the coarsest lattice shared by every mesh, if there is one.
    pub common: Option<ErrorNorms>,
}

/// Observed orders between two successive meshes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ObservedOrder {
    pub time: f64,
    pub h_coarse: f64,
    pub h_fine: f64,
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    pub extent: f64,
    pub reference_n0: usize,
    pub common_n0: Option<usize>,
    /// Sorted by time, then from coarse to fine.
    pub errors: Vec<MeshError>,
}

impl ConvergenceTable {
    /// `log(e_coarse / e_fine) / log(h_coarse / h_fine)` for successive meshes,
    /// measured on the own nodes or on the shared lattice.
    pub fn orders(&self, common: bool) -> Vec<ObservedOrder> {
        let pick = |e: &MeshError| if common { e.common } else { Some(e.own) };
        self.errors
            .windows(2)
            .filter(|w| w[0].time == w[1].time)
            .filter_map(|w| {
                let (a, b) = (pick(&w[0])?, pick(&w[1])?);
                let lh = (w[0].h / w[1].h).ln();
                Some(ObservedOrder {
                    time: w[0].time,
                    h_coarse: w[0].h,
                    h_fine: w[1].h,
                    l1: (a.l1 / b.l1).ln() / lh,
                    l2: (a.l2 / b.l2).ln() / lh,
                    linf: (a.linf / b.linf).ln() / lh,
                })
            })
            .collect()
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Runs `init` on every mesh and on the reference mesh with the kernel and
/// evaluator of `config`, then compares at `config.snapshots` (or the end time).
///
/// Nodes sit at integer multiples of `h`, so a mesh and the reference share
/// the lattice with `gcd(N0, N0_ref)` nodes per axis.
///
/// # Errors
/// Fewer than two meshes, a reference no finer than some mesh or sharing
/// fewer than 4 nodes per axis with it, or a failed run.
pub fn convergence_study(
    init: &InitialCondition,
    extent: f64,
    meshes: &[usize],
    reference_n0: usize,
    config: &RunConfig,
) -> Result<ConvergenceTable> {
    let mut meshes = meshes.to_vec();
    meshes.sort_unstable();
    meshes.dedup();
    if meshes.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two distinct meshes".into()));
    }
    for &n in &meshes {
        let shared = gcd(n, reference_n0);
        if n >= reference_n0 || shared < 4 || shared % 2 != 0 {
            return Err(Error::Config(format!(
                "reference N0 = {reference_n0} must be finer than mesh N0 = {n} and share an even lattice of at least 4 nodes with it (shares {shared})"
            )));
        }
    }
    let mut times = if config.snapshots.is_empty() { vec![config.end_time] } else { config.snapshots.clone() };
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut cfg = config.clone();
    cfg.snapshots = times.clone();
    let g = meshes.iter().fold(reference_n0, |acc, &n| gcd(acc, n));
    let common = if g >= 4 && g % 2 == 0 { Some(VelocityGrid::new(extent, g)?) } else { None };

    let solve = |n0: usize| -> Result<Trajectory> {
        let grid = VelocityGrid::new(extent, n0)?;
        run(&init.build(&grid)?, &cfg).map_err(|e| e.error)
    };
    let reference = solve(reference_n0)?;
    let mut errors = Vec::new();
    let runs = meshes.iter().map(|&n| solve(n).map(|t| (n, t))).collect::<Result<Vec<_>>>()?;
    for &t in &times {
        let fr = reference.snapshot_at(t).ok_or_else(|| Error::Numerical(format!("no reference snapshot at t = {t}")))?;
        for (n0, traj) in &runs {
            let f = traj.snapshot_at(t).ok_or_else(|| Error::Numerical(format!("no snapshot at t = {t}")))?;
            let common = match &common {
                Some(c) => Some(relative_errors(&restrict(f, c)?, fr)?),
                None => None,
            };
            let shared_n0 = gcd(*n0, reference_n0);
            let own = if shared_n0 == *n0 {
                relative_errors(f, fr)?
            } else {
                relative_errors(&restrict(f, &VelocityGrid::new(extent, shared_n0)?)?, fr)?
            };
            errors.push(MeshError { time: t, n0: *n0, h: f.grid().spacing(), shared_n0, own, common });
        }
    }
    Ok(ConvergenceTable { extent, reference_n0, common_n0: common.map(|c| c.n0()), errors })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::initcond;

    struct Zero;
    impl RhsEvaluator for Zero {
        fn rhs(&self, f: &ScalarField) -> Result<ScalarField> {
            Ok(ScalarField::zeros(*f.grid()))
        }
        fn name(&self) -> &str {
            "zero"
        }
    }

    struct Nan;
    impl RhsEvaluator for Nan {
        fn rhs(&self, f: &ScalarField) -> Result<ScalarField> {
            let mut v = vec![0.0; f.grid().len()];
            v[0] = f64::NAN;
            // bypass the finiteness check of from_values
            let mut q = ScalarField::zeros(*f.grid());
            q.values_mut().copy_from_slice(&v);
            Ok(q)
        }
        fn name(&self) -> &str {
            "nan"
        }
    }

    fn grid() -> VelocityGrid {
        VelocityGrid::new(6.0, 12).unwrap()
    }

    #[test]
    fn smooth_data_converge_at_second_order() {
        let init = InitialCondition::Bimaxwellian { t_parallel: 0.1, t_perp: 0.3, axis: 0 };
        let mut cfg = RunConfig::new(0.2);
        cfg.dt_coefficient = 1.0;
        let table = convergence_study(&init, 3.0, &[16, 8], 32, &cfg).unwrap();
        assert_eq!(table.common_n0, Some(8));
        assert_eq!(table.errors.iter().map(|e| e.n0).collect::<Vec<_>>(), [8, 16]);
        let o = table.orders(false);
        assert_eq!(o.len(), 1);
        // the reference is only twice finer, which inflates the observed order
        assert!(o[0].l2 > 1.8 && o[0].l2 < 3.5, "{o:?}");
        assert_eq!(table.errors[0].common, Some(table.errors[0].own));
        assert_eq!(table.errors[1].shared_n0, 16);
    }

    #[test]
    fn non_nested_mesh_uses_shared_lattice() {
        let init = InitialCondition::Bimaxwellian { t_parallel: 0.1, t_perp: 0.3, axis: 0 };
        let mut cfg = RunConfig::new(0.05);
        cfg.dt_coefficient = 1.0;
        let table = convergence_study(&init, 3.0, &[8, 12], 24, &cfg).unwrap();
        assert_eq!(table.common_n0, Some(4));
        assert_eq!(table.errors.iter().map(|e| e.shared_n0).collect::<Vec<_>>(), [8, 12]);
        let cfg16 = RunConfig { snapshots: vec![], ..cfg };
        let t = convergence_study(&init, 3.0, &[12, 8], 32, &cfg16).unwrap();
        // 12 and 32 share the 4-node lattice, which is also the common one
        assert_eq!(t.errors[1].shared_n0, 4);
        assert_eq!(Some(t.errors[1].own), t.errors[1].common);
    }

    #[test]
    fn convergence_study_rejects_bad_meshes() {
        let init = InitialCondition::Gmm;
        let cfg = RunConfig::new(0.0);
        assert!(convergence_study(&init, 3.0, &[8], 16, &cfg).is_err());
        assert!(convergence_study(&init, 3.0, &[8, 8], 16, &cfg).is_err());
        assert!(convergence_study(&init, 3.0, &[8, 16], 16, &cfg).is_err());
        // 6 and 16 share only 2 nodes per axis
        assert!(convergence_study(&init, 3.0, &[6, 8], 16, &cfg).is_err());
    }

    #[test]
    fn zero_rhs_is_identity() {
        let f = initcond::gmm(&grid());
        assert_eq!(step_euler(&f, 0.3, &Zero).unwrap().values(), f.values());
    }

    #[test]
    fn maxwellian_step_is_fixed_point() {
        let g = grid();
        let f = initcond::maxwellian(&g, 0.4).unwrap();
        let eval = FastEvaluator::new(&g, &builtin::gaussian_ss_oracle(), DEFAULT_LOG_FLOOR).unwrap();
        let next = step_euler(&f, 0.1 * g.spacing().powi(2), &eval).unwrap();
        let d = f.values().iter().zip(next.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(d <= 1e-10 * f.max_abs());
    }

    #[test]
    fn one_step_conserves_moments() {
        let g = grid();
        let f = initcond::gmm(&g);
        let eval = DirectEvaluator::new(Arc::new(builtin::gaussian_ss_oracle()), DEFAULT_LOG_FLOOR);
        let h2 = g.spacing().powi(2);
        for dt in [0.1 * h2, 1.0 * h2] {
            let next = step_euler(&f, dt, &eval).unwrap();
            let (a, b) = (moments(&f), moments(&next));
            assert!((a.mass - b.mass).abs() <= 1e-12);
            assert!((a.energy - b.energy).abs() <= 1e-12 * a.energy);
            assert!((a.momentum - b.momentum).amax() <= 1e-12 * a.energy.sqrt());
        }
    }

    #[test]
    fn zero_end_time_keeps_only_initial_state() {
        let f = initcond::rm(&grid());
        let mut c = RunConfig::new(0.0);
        c.snapshots = vec![0.0];
        let traj = run_with(&f, &c, &Zero, |_| {}).unwrap();
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.snapshots[0].1.values(), f.values());
    }

    #[test]
    fn steps_land_on_snapshot_times() {
        let g = grid();
        let f = initcond::gmm(&g);
        let mut c = RunConfig::new(0.05);
        c.dt_coefficient = 0.07;
        c.snapshots = vec![0.0, 0.0123, 0.03];
        let traj = run_with(&f, &c, &Zero, |_| {}).unwrap();
        let times: Vec<f64> = traj.snapshots.iter().map(|s| s.0).collect();
        assert_eq!(times, vec![0.0, 0.0123, 0.03, 0.05]);
        assert!(traj.records.iter().any(|r| r.time == 0.0123));
        assert_eq!(traj.records.last().unwrap().time, 0.05);
        let dt = c.dt(&g);
        assert!(traj.records.windows(2).all(|w| w[1].time - w[0].time <= dt * (1.0 + 1e-12)));
    }

    #[test]
    fn failures_carry_diagnostics() {
        let f = initcond::gmm(&grid());
        let err = run_with(&f, &RunConfig::new(0.01), &Nan, |_| {}).unwrap_err();
        assert!(matches!(err.error, Error::Numerical(_)));
        assert_eq!(err.last_state.values(), f.values());

        struct Grow;
        impl RhsEvaluator for Grow {
            fn rhs(&self, f: &ScalarField) -> Result<ScalarField> {
                let mut q = f.clone();
                q.scale(1e9);
                Ok(q)
            }
            fn name(&self) -> &str {
                "grow"
            }
        }
        let err = run_with(&f, &RunConfig::new(1.0), &Grow, |_| {}).unwrap_err();
        assert!(err.to_string().contains("blow-up"), "{err}");

        let mut bad = RunConfig::new(1.0);
        bad.snapshots = vec![2.0];
        assert!(run_with(&f, &bad, &Zero, |_| {}).is_err());
        let mut heavy = f.clone();
        heavy.scale(2.0);
        assert!(run_with(&heavy, &RunConfig::new(0.1), &Zero, |_| {}).is_err());
    }

    #[test]
    fn fast_rejects_non_separable() {
        let g = grid();
        let k: Arc<dyn CollisionKernel> = Arc::new(builtin::LandauLike::new(1.0, 1e-3));
        let e = make_evaluator(EvaluatorKind::Fast, k.clone(), &g, DEFAULT_LOG_FLOOR).err().unwrap();
        assert!(matches!(e, Error::DirectOnly(_)));
        assert!(make_evaluator(EvaluatorKind::Direct, k, &g, DEFAULT_LOG_FLOOR).is_ok());
    }

    #[test]
    fn config_json_and_csv() {
        let c = RunConfig::from_json(r#"{"end_time": 1.0, "snapshots": [0.5], "evaluator": "direct"}"#).unwrap();
        assert_eq!(c.dt_coefficient, DEFAULT_DT_COEFFICIENT);
        assert_eq!(c.evaluator, EvaluatorKind::Direct);
        let e = RunConfig::from_json(r#"{"end_time": 1.0, "dt_coefficent": 0.2}"#).unwrap_err();
        assert!(e.to_string().contains("dt_coefficent"), "{e}");
        let e = RunConfig::from_json(r#"{"end_time": 1.0, "snapshots": ["x"]}"#).unwrap_err();
        assert!(e.to_string().contains("snapshots"), "{e}");

        let f = initcond::gmm(&grid());
        let traj = run_with(&f, &RunConfig::new(0.01), &Zero, |_| {}).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.csv");
        traj.write_diagnostics_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert_eq!(text.lines().next().unwrap(), "time,mass,px,py,pz,energy,entropy,min_f");
        assert_eq!(text.lines().count(), traj.records.len() + 1);
        let files = write_snapshots(&traj, dir.path(), "f64").unwrap();
        let (back, t) = crate::grid::read_snapshot(&files[1]).unwrap();
        assert_eq!(t, 0.01);
        assert_eq!(back.values(), traj.final_state.values());
    }
}
