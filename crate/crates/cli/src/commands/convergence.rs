use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;
use spectral_collision::analysis::ErrorNorms;
use spectral_collision::solver::{convergence_study, ConvergenceTable, EvaluatorKind};

use super::{to_value, Manifest};
use crate::config::{create_dir, load, write_json, InitRef, KernelRef, RunSection};
use crate::error::{CliError, CliResult};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConvergenceConfig {
    #[serde(rename = "L")]
    extent: f64,
    meshes: Vec<usize>,
    reference: usize,
    kernel: KernelRef,
    init: InitRef,
    run: RunSection,
}

#[derive(Debug, Serialize)]
struct ErrorRow {
    time: f64,
    #[serde(rename = "N0")]
    n0: usize,
    h: f64,
    #[serde(rename = "shared_N0")]
    shared_n0: usize,
    l1: f64,
    l2: f64,
    linf: f64,
    common_l1: Option<f64>,
    common_l2: Option<f64>,
    common_linf: Option<f64>,
}

#[derive(Debug, Serialize)]
struct OrderRow {
    time: f64,
    lattice: &'static str,
    h_coarse: f64,
    h_fine: f64,
    l1: f64,
    l2: f64,
    linf: f64,
}

pub fn run(config: &Path, out: &Path, evaluator: Option<EvaluatorKind>) -> CliResult<()> {
    let started = Instant::now();
    let cfg = load::<ConvergenceConfig>(config)?;
    let c = &cfg.value;
    if c.meshes.len() < 2 {
        return Err(CliError::validation("need at least two meshes").at("meshes"));
    }
    c.kernel.resolve(&cfg.base, "kernel")?;
    let init = c.init.condition()?;
    let run_cfg = c.run.to_run_config(c.kernel.reference(&cfg.base), evaluator)?;
    create_dir(out)?;
    let manifest = Manifest::new("convergence", cfg.raw.clone(), json!({ "init": to_value(&init)?, "run": to_value(&run_cfg)? }));
    let result = convergence_study(&init, c.extent, &c.meshes, c.reference, &run_cfg)
        .map_err(CliError::from)
        .and_then(|table| write_tables(out, &table));
    manifest.finish(out, started, result)
}

fn write_tables(out: &Path, t: &ConvergenceTable) -> CliResult<()> {
    let mut w = csv::Writer::from_path(out.join("errors.csv"))?;
    for e in &t.errors {
        w.serialize(ErrorRow {
            time: e.time,
            n0: e.n0,
            h: e.h,
            shared_n0: e.shared_n0,
            l1: e.own.l1,
            l2: e.own.l2,
            linf: e.own.linf,
            common_l1: e.common.map(|c| c.l1),
            common_l2: e.common.map(|c| c.l2),
            common_linf: e.common.map(|c| c.linf),
        })?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(out.join("orders.csv"))?;
    for (lattice, common) in [("own", false), ("common", true)] {
        for o in t.orders(common) {
            w.serialize(OrderRow {
                time: o.time,
                lattice,
                h_coarse: o.h_coarse,
                h_fine: o.h_fine,
                l1: o.l1,
                l2: o.l2,
                linf: o.linf,
            })?;
        }
    }
    w.flush()?;

    // one row per h, one column per time
    let mut times: Vec<f64> = t.errors.iter().map(|e| e.time).collect();
    times.dedup();
    let mut hs: Vec<(usize, f64)> = t.errors.iter().map(|e| (e.n0, e.h)).collect();
    hs.sort_by_key(|x| x.0);
    hs.dedup_by_key(|x| x.0);
    for (name, pick) in [
        ("l1", (|n: &ErrorNorms| n.l1) as fn(&ErrorNorms) -> f64),
        ("l2", |n: &ErrorNorms| n.l2),
        ("linf", |n: &ErrorNorms| n.linf),
    ] {
        let mut w = csv::Writer::from_path(out.join(format!("table_{name}.csv")))?;
        let mut header = vec!["h".to_string(), "N0".to_string()];
        header.extend(times.iter().map(|t| format!("t={t}")));
        w.write_record(&header)?;
        for &(n0, h) in &hs {
            let mut row = vec![h.to_string(), n0.to_string()];
            for &time in &times {
                let e = t.errors.iter().find(|e| e.n0 == n0 && e.time == time);
                row.push(e.map_or(String::new(), |e| pick(&e.own).to_string()));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
    }
    write_json(
        &out.join("convergence.json"),
        &json!({ "table": t, "orders_own": t.orders(false), "orders_common": t.orders(true) }),
    )
}
