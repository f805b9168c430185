//! JSON configuration sections shared by the commands.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use spectral_collision::initcond::InitialCondition;
use spectral_collision::kernels::builtin;
use spectral_collision::solver::{EvaluatorKind, RunConfig, DEFAULT_DT_COEFFICIENT};
use spectral_collision::{CollisionKernel, SsKernel, VelocityGrid};

use crate::error::{CliError, CliResult};

/// A parsed config together with its raw JSON, for manifests.
pub struct Loaded<T> {
    pub value: T,
    pub raw: serde_json::Value,
    /// Directory relative paths inside the config are resolved against.
    pub base: PathBuf,
}

pub fn load<T: DeserializeOwned>(path: &Path) -> CliResult<Loaded<T>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let raw: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::validation(format!("{}: {e}", path.display())))?;
    let value = serde_path_to_error::deserialize(raw.clone())
        .map_err(|e| CliError::validation(format!("{}: field `{}`: {}", path.display(), e.path(), e.inner())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(Loaded { value, raw, base })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N0")]
    pub n0: usize,
}

impl GridSection {
    pub fn build(&self) -> CliResult<VelocityGrid> {
        VelocityGrid::new(self.extent, self.n0).map_err(|e| CliError::from(e).at("grid"))
    }
}

/// `"name"`, `{"builtin": "name"}` or `{"file": "kernel.json"}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KernelRef {
    Name(String),
    Builtin { builtin: String },
    File { file: PathBuf },
}

impl KernelRef {
    /// The reference as understood by [`builtin::resolve`].
    pub fn reference(&self, base: &Path) -> String {
        match self {
            KernelRef::Name(n) | KernelRef::Builtin { builtin: n } => {
                if builtin::BUILTIN_NAMES.contains(&n.as_str()) || Path::new(n).is_absolute() {
                    n.clone()
                } else {
                    base.join(n).to_string_lossy().into_owned()
                }
            }
            KernelRef::File { file } => base.join(file).to_string_lossy().into_owned(),
        }
    }

    pub fn resolve(&self, base: &Path, field: &str) -> CliResult<Arc<dyn CollisionKernel>> {
        if let KernelRef::Builtin { builtin: n } = self {
            if !builtin::BUILTIN_NAMES.contains(&n.as_str()) {
                return Err(CliError::validation(format!(
                    "unknown built-in kernel {n:?} (one of {})",
                    builtin::BUILTIN_NAMES.join(", ")
                ))
                .at(field));
            }
        }
        builtin::resolve(&self.reference(base)).map_err(|e| CliError::from(e).at(field))
    }

    pub fn resolve_ss(&self, base: &Path, field: &str) -> CliResult<SsKernel> {
        let k = self.resolve(base, field)?;
        k.as_ss()
            .cloned()
            .ok_or_else(|| CliError::validation(format!("kernel '{}' is not spectrally separable", k.name())).at(field))
    }
}

/// `"gmm"`, `"maxwellian:0.3"`, or `{"kind": "maxwellian", "temperature": 0.3}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InitRef {
    Spec(String),
    Full(InitialCondition),
}

impl InitRef {
    pub fn condition(&self) -> CliResult<InitialCondition> {
        match self {
            InitRef::Spec(s) => InitialCondition::parse(s).map_err(|e| CliError::from(e).at("init")),
            InitRef::Full(c) => Ok(c.clone()),
        }
    }
}

fn default_c() -> f64 {
    DEFAULT_DT_COEFFICIENT
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    #[serde(rename = "T")]
    pub end_time: f64,
    #[serde(default = "default_c")]
    pub c_dt: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    #[serde(default)]
    pub evaluator: Option<EvaluatorKind>,
    #[serde(default)]
    pub f_min: Option<f64>,
    #[serde(default)]
    pub negativity_tol: Option<f64>,
}

impl RunSection {
    pub fn to_run_config(&self, kernel: String, evaluator: Option<EvaluatorKind>) -> CliResult<RunConfig> {
        let mut c = RunConfig::new(self.end_time);
        c.dt_coefficient = self.c_dt;
        c.snapshots = self.snapshots.clone();
        c.evaluator = evaluator.or(self.evaluator).unwrap_or_default();
        c.kernel = kernel;
        if let Some(v) = self.f_min {
            c.f_min = v;
        }
        if let Some(v) = self.negativity_tol {
            c.negativity_tol = v;
        }
        c.validate().map_err(|e| CliError::from(e).at("run"))?;
        Ok(c)
    }
}

pub fn write_json(path: &Path, value: &impl Serialize) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

pub fn create_dir(dir: &Path) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))
}
