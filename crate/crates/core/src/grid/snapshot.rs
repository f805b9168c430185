//! Field snapshot files.
//!
//! Line one is a JSON header `{"L": .., "N0": .., "time": ..}`. The node
//! values follow in storage order, either as CSV text (one value per line,
//! `.csv`) or as raw little-endian `f64` bytes (`.f64`).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ScalarField, VelocityGrid};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    #[serde(rename = "L")]
    pub extent: f64,
    #[serde(rename = "N0")]
    pub n0: usize,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Encoding {
    Csv,
    Binary,
}

fn encoding_for(path: &Path) -> Result<Encoding> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => Ok(Encoding::Csv),
        Some("f64") => Ok(Encoding::Binary),
        other => Err(Error::Format(format!(
            "unsupported snapshot extension {:?} (expected .csv or .f64)",
            other.unwrap_or("")
        ))),
    }
}

/// Writes `field` at `time`; the encoding follows the file extension.
pub fn write_snapshot(path: &Path, field: &ScalarField, time: f64) -> Result<()> {
    let enc = encoding_for(path)?;
    let grid = field.grid();
    let header = SnapshotHeader { extent: grid.extent(), n0: grid.n0(), time };
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    match enc {
        Encoding::Csv => {
            for x in field.values() {
                // `{:e}` with default precision round-trips f64 exactly
                writeln!(w, "{x:e}")?;
            }
        }
        Encoding::Binary => {
            for x in field.values() {
                w.write_all(&x.to_le_bytes())?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a snapshot written by [`write_snapshot`].
pub fn read_snapshot(path: &Path) -> Result<(ScalarField, f64)> {
    let enc = encoding_for(path)?;
    let mut r = BufReader::new(File::open(path)?);
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: SnapshotHeader = serde_json::from_str(line.trim_end())
        .map_err(|e| Error::Format(format!("bad snapshot header: {e}")))?;
    let grid = VelocityGrid::new(header.extent, header.n0)?;
    let mut values = Vec::with_capacity(grid.len());
    match enc {
        Encoding::Csv => {
            for (lineno, l) in r.lines().enumerate() {
                let l = l?;
                let t = l.trim();
                if t.is_empty() {
                    continue;
                }
                let x: f64 = t.parse().map_err(|_| {
                    Error::Format(format!("line {}: cannot parse '{t}' as a number", lineno + 2))
                })?;
                values.push(x);
            }
        }
        Encoding::Binary => {
            let mut bytes = Vec::new();
            r.read_to_end(&mut bytes)?;
            if bytes.len() % 8 != 0 {
                return Err(Error::Format("binary body is not a whole number of f64 values".into()));
            }
            values.extend(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())));
        }
    }
    if values.len() != grid.len() {
        return Err(Error::Format(format!(
            "snapshot has {} values, header implies {}",
            values.len(),
            grid.len()
        )));
    }
    Ok((ScalarField::from_values(grid, values)?, header.time))
}
