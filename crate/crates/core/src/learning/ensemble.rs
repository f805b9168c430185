//! Time-stamped velocity samples and their file format.
//!
//! The file starts with one JSON line
//! `{"n_snapshots", "n_samples", "dt", "times"}` followed by a CSV body with
//! header `snapshot_index,vx,vy,vz`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    times: Vec<f64>,
    samples: Vec<Vec<Vector3<f64>>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    n_snapshots: usize,
    n_samples: usize,
    dt: f64,
    times: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    snapshot_index: usize,
    vx: f64,
    vy: f64,
    vz: f64,
}

impl ParticleEnsemble {
    /// # Errors
    /// Fewer than two snapshots, empty or unequal sample lists, non-finite
    /// velocities, or times that are not strictly increasing with constant spacing.
    pub fn new(times: Vec<f64>, samples: Vec<Vec<Vector3<f64>>>) -> Result<Self> {
        if times.len() < 2 || times.len() != samples.len() {
            return Err(Error::Config(format!(
                "ensemble needs at least two snapshots with one time each ({} times, {} sample lists)",
                times.len(),
                samples.len()
            )));
        }
        let n = samples[0].len();
        if n == 0 {
            return Err(Error::Config("ensemble has no samples".into()));
        }
        if let Some(bad) = samples.iter().position(|s| s.len() != n) {
            return Err(Error::Config(format!("snapshot {bad} has {} samples, expected {n}", samples[bad].len())));
        }
        if samples.iter().flatten().any(|v| !v.iter().all(|x| x.is_finite())) {
            return Err(Error::Config("ensemble contains non-finite velocities".into()));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0) {
            return Err(Error::Config("snapshot times must be strictly increasing".into()));
        }
        for (k, w) in times.windows(2).enumerate() {
            if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(times[k].abs()) {
                return Err(Error::Config(format!("snapshot spacing is not uniform at index {}", k + 1)));
            }
        }
        Ok(Self { times, samples })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of snapshots, `N_T + 1`.
    pub fn n_snapshots(&self) -> usize {
        self.times.len()
    }

    /// `N_MD`.
    pub fn n_samples(&self) -> usize {
        self.samples[0].len()
    }

    pub fn dt(&self) -> f64 {
        self.times[1] - self.times[0]
    }

    pub fn snapshot(&self, n: usize) -> &[Vector3<f64>] {
        &self.samples[n]
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        let header =
            Header { n_snapshots: self.n_snapshots(), n_samples: self.n_samples(), dt: self.dt(), times: self.times.clone() };
        serde_json::to_writer(&mut w, &header)?;
        writeln!(w)?;
        let mut csv = csv::Writer::from_writer(w);
        for (n, snap) in self.samples.iter().enumerate() {
            for v in snap {
                csv.serialize(Row { snapshot_index: n, vx: v[0], vy: v[1], vz: v[2] }).map_err(csv_err)?;
            }
        }
        csv.flush()?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(std::fs::File::open(path)?);
        let mut line = String::new();
        r.read_line(&mut line)?;
        let de = &mut serde_json::Deserializer::from_str(line.trim());
        let header: Header = serde_path_to_error::deserialize(de)
            .map_err(|e| Error::Format(format!("ensemble header at {}: {}", e.path(), e.inner())))?;
        if header.times.len() != header.n_snapshots {
            return Err(Error::Format(format!(
                "header lists {} times for {} snapshots",
                header.times.len(),
                header.n_snapshots
            )));
        }
        let mut samples = vec![Vec::with_capacity(header.n_samples); header.n_snapshots];
        for (line_no, row) in csv::Reader::from_reader(r).deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::Format(format!("ensemble row {}: {e}", line_no + 1)))?;
            let slot = samples.get_mut(row.snapshot_index).ok_or_else(|| {
                Error::Format(format!("row {} has snapshot index {} out of range", line_no + 1, row.snapshot_index))
            })?;
            slot.push(Vector3::new(row.vx, row.vy, row.vz));
        }
        if samples.iter().any(|s| s.len() != header.n_samples) {
            return Err(Error::Format(format!("expected {} samples in every snapshot", header.n_samples)));
        }
        let e = Self::new(header.times, samples)?;
        if (e.dt() - header.dt).abs() > 1e-9 * header.dt.abs() {
            return Err(Error::Format(format!("header dt {} disagrees with the times ({})", header.dt, e.dt())));
        }
        Ok(e)
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}
