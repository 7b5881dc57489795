//! Report and CSV files.

use std::fs;
use std::path::{Path, PathBuf};

use hamdelay_core::kepler::PlanarLoop;
use hamdelay_core::{Loop, TimeGrid};
use nalgebra::DVector;
use serde::Serialize;

use crate::{CliError, CliResult};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Config(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    /// Header plus one row of strings per record.
    pub fn write_csv(
        &self,
        name: &str,
        header: &[String],
        rows: &[Vec<String>],
    ) -> CliResult<PathBuf> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        Ok(path)
    }

    pub fn write_loop(&self, name: &str, u: &Loop) -> CliResult<PathBuf> {
        let n = u.dim() / 2;
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((1..=n).map(|i| format!("q{i}")))
            .chain((1..=n).map(|i| format!("p{i}")))
            .collect();
        let rows: Vec<Vec<String>> = u
            .grid()
            .nodes()
            .iter()
            .zip(u.samples())
            .map(|(&t, x)| {
                std::iter::once(t)
                    .chain(x.iter().copied())
                    .map(fmt_f64)
                    .collect()
            })
            .collect();
        self.write_csv(name, &header, &rows)
    }

    pub fn write_planar(&self, name: &str, x: &PlanarLoop) -> CliResult<PathBuf> {
        let header = ["t", "re", "im"].map(String::from);
        let rows: Vec<Vec<String>> = x
            .grid()
            .nodes()
            .iter()
            .zip(x.samples())
            .map(|(&t, z)| vec![fmt_f64(t), fmt_f64(z.re), fmt_f64(z.im)])
            .collect();
        self.write_csv(name, &header, &rows)
    }
}

/// Reads a loop written by [`OutDir::write_loop`]; the time column must
/// hold the uniform nodes `k/N`.
pub fn read_loop(path: &Path) -> CliResult<Loop> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path)?;
    let width = r.headers()?.len();
    if width < 3 || width % 2 == 0 {
        return Err(bad(format!(
            "expected t and 2n coordinate columns, got {width} columns"
        )));
    }
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let values = record
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| bad(format!("row {}: {e}", line + 1)))?;
        times.push(values[0]);
        samples.push(DVector::from_vec(values[1..].to_vec()));
    }
    let grid = TimeGrid::new(samples.len())?;
    for (k, t) in times.iter().enumerate() {
        if (t - grid.node(k)).abs() > 1e-12 {
            return Err(bad(format!(
                "row {}: time {t} is not the node {}",
                k + 1,
                grid.node(k)
            )));
        }
    }
    Ok(Loop::new(grid, samples)?)
}
