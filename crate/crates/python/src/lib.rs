//! Python bindings: grids, fields, kernels, both evaluators, time
//! integration, ensembles and weak-form fitting.

use std::collections::HashMap;
use std::sync::Arc;

use pyo3::exceptions::{PyArithmeticError, PyIOError, PyIndexError, PyValueError};
use pyo3::prelude::*;

use spectral_collision::analysis::{entropy, moments};
use spectral_collision::direct::{collision_flux_direct, collision_rhs_direct, DEFAULT_LOG_FLOOR};
use spectral_collision::fast::{collision_flux_fast, collision_rhs_fast, ConvolutionPlan, TermTable};
use spectral_collision::initcond::InitialCondition;
use spectral_collision::kernels::{builtin, check_admissibility};
use spectral_collision::learning::{self, FitConfig, ParticleEnsemble, TestFunctionSet, WeakFormObjective};
use spectral_collision::solver::{self, RunConfig};
use spectral_collision::{CollisionKernel, Error, ScalarField, SsKernel, Vector3, VectorField, VelocityGrid};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyArithmeticError::new_err(e.to_string()),
        Error::Io(_) => PyIOError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for spectral_collision::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn rows(f: &VectorField) -> Vec<[f64; 3]> {
    f.values().iter().map(|v| [v[0], v[1], v[2]]).collect()
}

/// Cubic velocity grid `[-L, L]³` with `N0` nodes per axis.
#[pyclass(name = "Grid", module = "sscollision", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyGrid {
    inner: VelocityGrid,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(extent: f64, n0: usize) -> PyResult<Self> {
        Ok(Self { inner: VelocityGrid::new(extent, n0).py()? })
    }

    #[getter]
    fn extent(&self) -> f64 {
        self.inner.extent()
    }

    #[getter]
    fn n0(&self) -> usize {
        self.inner.n0()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.inner.spacing()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Node coordinates along one axis.
    fn axis(&self) -> Vec<f64> {
        (0..self.inner.n0()).map(|i| self.inner.axis_coord(i)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(extent={}, n0={})", self.inner.extent(), self.inner.n0())
    }
}

/// Density on a grid, flattened with the last axis fastest.
#[pyclass(name = "Field", module = "sscollision", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyField {
    inner: ScalarField,
}

#[pymethods]
impl PyField {
    #[new]
    fn new(grid: &PyGrid, values: Vec<f64>) -> PyResult<Self> {
        Ok(Self { inner: ScalarField::from_values(grid.inner, values).py()? })
    }

    /// `gmm`, `rm`, `maxwellian:T`, `bimaxwellian:T1,T2[,axis]` or `uniform_ball:R`.
    #[staticmethod]
    fn initial(grid: &PyGrid, spec: &str) -> PyResult<Self> {
        let ic = InitialCondition::parse(spec).py()?;
        Ok(Self { inner: ic.build(&grid.inner).py()? })
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid { inner: *self.inner.grid() }
    }

    fn values(&self) -> Vec<f64> {
        self.inner.values().to_vec()
    }

    /// Mass, momentum components and energy.
    fn moments(&self) -> HashMap<&'static str, f64> {
        let m = moments(&self.inner);
        HashMap::from([
            ("mass", m.mass),
            ("px", m.momentum[0]),
            ("py", m.momentum[1]),
            ("pz", m.momentum[2]),
            ("energy", m.energy),
        ])
    }

    #[pyo3(signature = (f_min = DEFAULT_LOG_FLOOR))]
    fn entropy(&self, f_min: f64) -> f64 {
        entropy(&self.inner, f_min)
    }

    fn __repr__(&self) -> String {
        format!("Field(n0={}, mass={:.6})", self.inner.grid().n0(), self.inner.integral())
    }
}

/// A collision kernel; the spectrally separable ones also carry parameters.
#[pyclass(name = "Kernel", module = "sscollision", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyKernel {
    inner: Arc<dyn CollisionKernel>,
}

impl PyKernel {
    fn ss(&self) -> PyResult<&SsKernel> {
        self.inner.as_ss().ok_or_else(|| py_err(Error::DirectOnly(self.inner.name().to_string())))
    }

    fn from_ss(k: SsKernel) -> Self {
        Self { inner: Arc::new(k) }
    }
}

#[pymethods]
impl PyKernel {
    /// A built-in name or a kernel JSON path.
    #[staticmethod]
    fn resolve(reference: &str) -> PyResult<Self> {
        Ok(Self { inner: builtin::resolve(reference).py()? })
    }

    #[staticmethod]
    fn builtin_names() -> Vec<&'static str> {
        builtin::BUILTIN_NAMES.to_vec()
    }

    /// Separable kernel with Gaussian factors; each mode is `(amplitude, w_l, w_m, w_n)`.
    #[staticmethod]
    fn gaussian(name: &str, channel1: Vec<(f64, f64, f64, f64)>, channel2: Vec<(f64, f64, f64, f64)>) -> PyResult<Self> {
        let modes = |c: Vec<(f64, f64, f64, f64)>| -> Vec<builtin::GaussianMode> {
            c.into_iter().map(|(a, l, m, n)| builtin::GaussianMode::new(a, l, m, n)).collect()
        };
        Ok(Self::from_ss(builtin::gaussian_ss(name, &modes(channel1), &modes(channel2)).py()?))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self::from_ss(SsKernel::from_json(text).py()?))
    }

    fn to_json(&self) -> PyResult<String> {
        self.ss()?.to_json().py()
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.ss()?.save(std::path::Path::new(path)).py()
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn separable(&self) -> bool {
        self.inner.as_ss().is_some()
    }

    fn params(&self) -> PyResult<Vec<f64>> {
        Ok(self.ss()?.params())
    }

    fn with_params(&self, params: Vec<f64>) -> PyResult<Self> {
        Ok(Self::from_ss(self.ss()?.with_params(&params).py()?))
    }

    /// The 3×3 matrix `ω(v, v')` as rows.
    fn omega(&self, v: [f64; 3], vp: [f64; 3]) -> [[f64; 3]; 3] {
        let m = self.inner.omega(&vec3(v), &vec3(vp));
        [0, 1, 2].map(|i| [m[(i, 0)], m[(i, 1)], m[(i, 2)]])
    }

    /// Channel function `g_c(|u|, |v|, |v'|)`, `c ∈ {1, 2}`.
    fn eval_g(&self, channel: usize, u: f64, v: f64, vp: f64) -> PyResult<f64> {
        if !(1..=2).contains(&channel) {
            return Err(PyIndexError::new_err("channel must be 1 or 2"));
        }
        Ok(self.ss()?.eval_g(channel, u, v, vp))
    }

    /// Worst sampled violation of each structural condition.
    #[pyo3(signature = (samples = 1000, seed = 0))]
    fn admissibility(&self, samples: usize, seed: u64) -> HashMap<&'static str, f64> {
        let r = check_admissibility(self.inner.as_ref(), samples, seed);
        HashMap::from([
            ("rotation", r.rotation),
            ("permutation", r.permutation),
            ("orthogonality", r.orthogonality),
            ("psd", r.psd),
            ("parity", r.parity),
            ("worst", r.worst()),
        ])
    }

    fn __repr__(&self) -> String {
        format!("Kernel({:?}, separable={})", self.inner.name(), self.separable())
    }
}

fn plan(field: &PyField, kernel: &PyKernel) -> PyResult<ConvolutionPlan> {
    ConvolutionPlan::new(field.inner.grid(), kernel.ss()?, &TermTable::build().py()?).py()
}

/// Collision flux per node by the O(N²) sum.
#[pyfunction]
#[pyo3(signature = (field, kernel, f_min = DEFAULT_LOG_FLOOR))]
fn flux_direct(py: Python<'_>, field: &PyField, kernel: &PyKernel, f_min: f64) -> Vec<[f64; 3]> {
    py.detach(|| rows(&collision_flux_direct(&field.inner, kernel.inner.as_ref(), f_min)))
}

#[pyfunction]
#[pyo3(signature = (field, kernel, f_min = DEFAULT_LOG_FLOOR))]
fn rhs_direct(py: Python<'_>, field: &PyField, kernel: &PyKernel, f_min: f64) -> PyField {
    py.detach(|| PyField { inner: collision_rhs_direct(&field.inner, kernel.inner.as_ref(), f_min) })
}

/// Collision flux per node by FFT convolutions; separable kernels only.
#[pyfunction]
#[pyo3(signature = (field, kernel, f_min = DEFAULT_LOG_FLOOR))]
fn flux_fast(py: Python<'_>, field: &PyField, kernel: &PyKernel, f_min: f64) -> PyResult<Vec<[f64; 3]>> {
    let p = plan(field, kernel)?;
    py.detach(|| collision_flux_fast(&field.inner, &p, f_min).map(|j| rows(&j))).py()
}

#[pyfunction]
#[pyo3(signature = (field, kernel, f_min = DEFAULT_LOG_FLOOR))]
fn rhs_fast(py: Python<'_>, field: &PyField, kernel: &PyKernel, f_min: f64) -> PyResult<PyField> {
    let p = plan(field, kernel)?;
    Ok(PyField { inner: py.detach(|| collision_rhs_fast(&field.inner, &p, f_min)).py()? })
}

/// Result of [`simulate`]: per-step records and the kept states.
#[pyclass(name = "Trajectory", module = "sscollision", frozen)]
struct PyTrajectory {
    inner: solver::Trajectory,
}

#[pymethods]
impl PyTrajectory {
    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    fn times(&self) -> Vec<f64> {
        self.inner.records.iter().map(|r| r.time).collect()
    }

    /// One column of the diagnostics: `mass`, `px`, `py`, `pz`, `energy`, `entropy` or `min_f`.
    fn diagnostic(&self, name: &str) -> PyResult<Vec<f64>> {
        let pick: fn(&solver::StepRecord) -> f64 = match name {
            "mass" => |r| r.mass,
            "px" => |r| r.px,
            "py" => |r| r.py,
            "pz" => |r| r.pz,
            "energy" => |r| r.energy,
            "entropy" => |r| r.entropy,
            "min_f" => |r| r.min_f,
            other => return Err(PyValueError::new_err(format!("unknown diagnostic {other:?}"))),
        };
        Ok(self.inner.records.iter().map(pick).collect())
    }

    fn snapshots(&self) -> Vec<(f64, PyField)> {
        self.inner.snapshots.iter().map(|(t, f)| (*t, PyField { inner: f.clone() })).collect()
    }

    #[getter]
    fn final_state(&self) -> PyField {
        PyField { inner: self.inner.final_state.clone() }
    }

    /// Largest relative drift of mass, momentum and energy.
    fn conservation_drift(&self) -> f64 {
        self.inner.conservation_drift().worst()
    }
}

/// Forward-Euler run with `dt = c_dt h²`; `evaluator` is `fast` or `direct`.
#[pyfunction]
#[pyo3(signature = (field, kernel, end_time, c_dt = solver::DEFAULT_DT_COEFFICIENT, snapshots = Vec::new(), evaluator = "fast"))]
fn simulate(
    py: Python<'_>,
    field: &PyField,
    kernel: &PyKernel,
    end_time: f64,
    c_dt: f64,
    snapshots: Vec<f64>,
    evaluator: &str,
) -> PyResult<PyTrajectory> {
    let mut config = RunConfig::new(end_time);
    config.dt_coefficient = c_dt;
    config.snapshots = snapshots;
    config.evaluator = evaluator.parse().py()?;
    config.kernel = kernel.inner.name().to_string();
    let eval = solver::make_evaluator(config.evaluator, Arc::clone(&kernel.inner), field.inner.grid(), config.f_min).py()?;
    let traj = py.detach(|| solver::run_with(&field.inner, &config, eval.as_ref(), |_| {}));
    Ok(PyTrajectory { inner: traj.map_err(|f| py_err(f.error))? })
}

/// Velocity samples at uniformly spaced times.
#[pyclass(name = "Ensemble", module = "sscollision", frozen)]
struct PyEnsemble {
    inner: ParticleEnsemble,
}

#[pymethods]
impl PyEnsemble {
    #[new]
    fn new(times: Vec<f64>, samples: Vec<Vec<[f64; 3]>>) -> PyResult<Self> {
        let s = samples.into_iter().map(|snap| snap.into_iter().map(vec3).collect()).collect();
        Ok(Self { inner: ParticleEnsemble::new(times, s).py()? })
    }

    #[staticmethod]
    fn read(path: &str) -> PyResult<Self> {
        Ok(Self { inner: ParticleEnsemble::read(std::path::Path::new(path)).py()? })
    }

    fn write(&self, path: &str) -> PyResult<()> {
        self.inner.write(std::path::Path::new(path)).py()
    }

    fn times(&self) -> Vec<f64> {
        self.inner.times().to_vec()
    }

    #[getter]
    fn n_samples(&self) -> usize {
        self.inner.n_samples()
    }

    fn snapshot(&self, n: usize) -> PyResult<Vec<[f64; 3]>> {
        if n >= self.inner.n_snapshots() {
            return Err(PyIndexError::new_err(format!("snapshot {n} of {}", self.inner.n_snapshots())));
        }
        Ok(self.inner.snapshot(n).iter().map(|v| [v[0], v[1], v[2]]).collect())
    }
}

/// Evolves `field` under `kernel` and samples `n_samples` coherent particles per time.
#[pyfunction]
#[pyo3(signature = (kernel, field, times, n_samples, seed = 0, c_dt = 1.0))]
fn synthesize(
    py: Python<'_>,
    kernel: &PyKernel,
    field: &PyField,
    times: Vec<f64>,
    n_samples: usize,
    seed: u64,
    c_dt: f64,
) -> PyResult<PyEnsemble> {
    let k = kernel.ss()?;
    let e = py.detach(|| learning::synthesize_ensemble(k, &field.inner, &times, n_samples, seed, c_dt));
    Ok(PyEnsemble { inner: e.py()? })
}

/// Weak-form loss of `kernel` against the ensemble with the standard test functions.
#[pyfunction]
#[pyo3(signature = (ensemble, kernel, pairs = 10_000, seed = 0))]
fn weak_form_loss(py: Python<'_>, ensemble: &PyEnsemble, kernel: &PyKernel, pairs: usize, seed: u64) -> PyResult<f64> {
    let tests = TestFunctionSet::standard();
    py.detach(|| WeakFormObjective::new(&ensemble.inner, &tests, pairs, seed)?.loss(kernel.inner.as_ref())).py()
}

/// Fits the kernel parameters selected by `mask`; returns the fitted kernel and the loss history.
#[pyfunction]
#[pyo3(signature = (ensemble, kernel, mask = None, pairs = 10_000, iterations = 60, seed = 0, decorrelated = true))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    ensemble: &PyEnsemble,
    kernel: &PyKernel,
    mask: Option<Vec<bool>>,
    pairs: usize,
    iterations: usize,
    seed: u64,
    decorrelated: bool,
) -> PyResult<(PyKernel, Vec<f64>)> {
    let start = kernel.ss()?;
    let config = FitConfig { pairs, iterations, seed, mask, decorrelated, ..FitConfig::default() };
    let tests = TestFunctionSet::standard();
    let r = py.detach(|| learning::fit(&ensemble.inner, start, &tests, &config)).py()?;
    Ok((PyKernel::from_ss(r.kernel), r.loss_history))
}

#[pymodule]
fn sscollision(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", spectral_collision::VERSION)?;
    m.add_class::<PyGrid>()?;
    m.add_class::<PyField>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyEnsemble>()?;
    m.add_function(wrap_pyfunction!(flux_direct, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_direct, m)?)?;
    m.add_function(wrap_pyfunction!(flux_fast, m)?)?;
    m.add_function(wrap_pyfunction!(rhs_fast, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(weak_form_loss, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    Ok(())
}
