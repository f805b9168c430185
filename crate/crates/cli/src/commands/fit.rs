use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use spectral_collision::kernels::basis::ParamKind;
use spectral_collision::kernels::check_admissibility;
use spectral_collision::kernels::ss::Factor;
use spectral_collision::learning::{self, FitConfig, ParticleEnsemble, TestFunctionSet, WeakFormObjective};
use spectral_collision::SsKernel;

use super::{to_value, Manifest};
use crate::config::{create_dir, load, write_json, GridSection, InitRef, KernelRef};
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum ParamSelection {
    All,
    Amplitudes,
    #[default]
    LAmplitudes,
}

impl ParamSelection {
    fn mask(self, k: &SsKernel) -> Vec<bool> {
        k.param_layout()
            .iter()
            .map(|s| match self {
                ParamSelection::All => true,
                ParamSelection::Amplitudes => s.kind == ParamKind::Amplitude,
                ParamSelection::LAmplitudes => s.kind == ParamKind::Amplitude && s.factor == Factor::L,
            })
            .collect()
    }
}

fn default_c() -> f64 {
    1.0
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Synthesize {
    kernel: KernelRef,
    grid: GridSection,
    init: InitRef,
    /// Snapshot spacing and the number of intervals.
    dt: f64,
    steps: usize,
    samples: usize,
    #[serde(default = "default_c")]
    c_dt: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FitFileConfig {
    #[serde(default)]
    ensemble: Option<PathBuf>,
    #[serde(default)]
    synthesize: Option<Synthesize>,
    /// Starting kernel; defaults to the synthesis kernel.
    #[serde(default)]
    initial_kernel: Option<KernelRef>,
    /// Factor applied to the selected parameters of the starting kernel.
    #[serde(default)]
    perturb: Option<f64>,
    #[serde(default)]
    params: ParamSelection,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    fit: FitConfig,
}

#[derive(Debug, Serialize)]
struct HistoryRow {
    iteration: usize,
    loss: f64,
    objective: f64,
}

#[derive(Debug, Serialize)]
struct MomentRow {
    snapshot: usize,
    test_function: usize,
    md: f64,
    fitted: f64,
    truth: Option<f64>,
}

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load::<FitFileConfig>(config)?;
    let c = &cfg.value;
    let seed = seed.unwrap_or(c.seed);
    let (ens, truth) = match (&c.ensemble, &c.synthesize) {
        (Some(p), None) => {
            let path = cfg.base.join(p);
            (ParticleEnsemble::read(&path).map_err(|e| CliError::from(e).at("ensemble"))?, None)
        }
        (None, Some(s)) => {
            let truth = s.kernel.resolve_ss(&cfg.base, "synthesize.kernel")?;
            let grid = s.grid.build()?;
            let f0 = s.init.condition()?.build(&grid).map_err(|e| CliError::from(e).at("synthesize.init"))?;
            let times: Vec<f64> = (0..=s.steps).map(|n| n as f64 * s.dt).collect();
            let ens = learning::synthesize_ensemble(&truth, &f0, &times, s.samples, seed, s.c_dt)
                .map_err(|e| CliError::from(e).at("synthesize"))?;
            (ens, Some(truth))
        }
        _ => return Err(CliError::validation("give exactly one of `ensemble` and `synthesize`")),
    };
    let start = match (&c.initial_kernel, &truth) {
        (Some(k), _) => k.resolve_ss(&cfg.base, "initial_kernel")?,
        (None, Some(t)) => t.clone(),
        (None, None) => return Err(CliError::validation("`initial_kernel` is required with an ensemble file")),
    };
    let mask = c.params.mask(&start);
    let start = match c.perturb {
        Some(s) => {
            let p: Vec<f64> = start.params().iter().zip(&mask).map(|(x, &m)| if m { x * s } else { *x }).collect();
            start.with_params(&p).map_err(|e| CliError::from(e).at("perturb"))?
        }
        None => start,
    };
    let fit_cfg = FitConfig { seed, mask: Some(mask), ..c.fit.clone() };
    create_dir(out)?;
    ens.write(&out.join("ensemble.ens"))?;
    let manifest = Manifest::new("fit", cfg.raw.clone(), json!({ "seed": seed, "fit": to_value(&fit_cfg)? }));

    let tests = TestFunctionSet::standard();
    let result = learning::fit(&ens, &start, &tests, &fit_cfg).map_err(CliError::from).and_then(|r| {
        r.kernel.save(&out.join("fitted_kernel.json"))?;
        let mut w = csv::Writer::from_path(out.join("loss_history.csv"))?;
        for (i, (l, o)) in r.loss_history.iter().zip(&r.objective_history).enumerate() {
            w.serialize(HistoryRow { iteration: i, loss: *l, objective: *o })?;
        }
        w.flush()?;

        let obj = WeakFormObjective::new(&ens, &tests, fit_cfg.pairs, seed)?;
        let fitted = obj.kinetic_moments(&r.kernel)?;
        let true_moments = truth.as_ref().map(|t| obj.kinetic_moments(t)).transpose()?;
        let mut moments = Vec::new();
        for (n, md) in obj.md_moments().iter().enumerate() {
            for (k, &m) in md.iter().enumerate() {
                let truth = true_moments.as_ref().map(|t| t[n][k]);
                moments.push(MomentRow { snapshot: n, test_function: k, md: m, fitted: fitted[n][k], truth });
            }
        }
        let first = r.loss_history[0];
        let last = *r.loss_history.last().unwrap_or(&first);
        let report = json!({
            "iterations": r.iterations,
            "initial_loss": first,
            "final_loss": last,
            "loss_reduction": first / last,
            "initial_params": start.params(),
            "fitted_params": r.kernel.params(),
            "true_params": truth.as_ref().map(|t| t.params()),
            "admissibility": check_admissibility(&r.kernel, 500, seed),
            "moments": moments,
        });
        println!("loss {first:.4e} -> {last:.4e} in {} iterations", r.iterations);
        write_json(&out.join("fit_report.json"), &report)
    });
    manifest.finish(out, started, result)
}
