//! Metric, summary and model files.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sumlogcone::data::format_float;
use sumlogcone::xgd::Trajectory;

use crate::error::{CliError, CliResult};

/// One row of a metrics file: the state after step `t`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRecord {
    pub t: usize,
    pub loss: f64,
    pub grad_norm: f64,
    pub ms: f64,
}

/// Rows `t = 1..=T` of a run; `timings[t]` is the elapsed time after step
/// `t` when timing is recorded.
pub fn records_from(trajectory: &Trajectory, timings: Option<&[f64]>) -> Vec<MetricsRecord> {
    (1..=trajectory.steps())
        .map(|t| MetricsRecord {
            t,
            loss: trajectory.values[t],
            grad_norm: trajectory.grad_norms[t - 1],
            ms: timings.and_then(|v| v.get(t).copied()).unwrap_or(0.0),
        })
        .collect()
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| CliError::io(path, e))
}

/// Writes `rows` (already formatted) under a header line.
pub fn write_table(
    path: &Path,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> CliResult<()> {
    let mut w = create(path)?;
    let io = |e| CliError::io(path, e);
    writeln!(w, "{}", header.join(",")).map_err(io)?;
    for row in rows {
        writeln!(w, "{}", row.join(",")).map_err(io)?;
    }
    finish(w, path)
}

/// `t,loss,grad_norm,ms`.
pub fn write_metrics(path: &Path, records: &[MetricsRecord]) -> CliResult<()> {
    write_table(
        path,
        &["t", "loss", "grad_norm", "ms"],
        records.iter().map(|r| {
            vec![r.t.to_string(), format_float(r.loss), format_float(r.grad_norm), format_float(r.ms)]
        }),
    )
}

/// One JSON object per line.
pub fn write_summary<T: Serialize>(path: &Path, lines: &[T]) -> CliResult<()> {
    let mut w = create(path)?;
    for line in lines {
        let text = serde_json::to_string(line).map_err(|e| CliError::Config(e.to_string()))?;
        writeln!(w, "{text}").map_err(|e| CliError::io(path, e))?;
    }
    finish(w, path)
}

/// A parameter matrix with its shape header:
///
/// ```text
/// kind,m,c,d
/// binary,2,2,3
/// <rows of comma-separated values>
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct ModelFile {
    pub kind: String,
    pub m: usize,
    pub c: usize,
    pub d: usize,
    pub rows: Vec<Vec<f64>>,
}

impl ModelFile {
    /// Splits a flat parameter vector into rows of length `d`.
    pub fn from_flat(kind: &str, m: usize, c: usize, d: usize, flat: &[f64]) -> Self {
        Self { kind: kind.to_string(), m, c, d, rows: flat.chunks(d).map(<[f64]>::to_vec).collect() }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.rows.concat()
    }

    pub fn save(&self, path: &Path) -> CliResult<()> {
        let mut w = create(path)?;
        let io = |e| CliError::io(path, e);
        writeln!(w, "kind,m,c,d").map_err(io)?;
        writeln!(w, "{},{},{},{}", self.kind, self.m, self.c, self.d).map_err(io)?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
            writeln!(w, "{}", cells.join(",")).map_err(io)?;
        }
        finish(w, path)
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let file = File::open(path).map_err(|e| CliError::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let mut next =
            || -> CliResult<Option<String>> { lines.next().transpose().map_err(|e| CliError::io(path, e)) };
        let bad = |line: usize, msg: &str| CliError::Config(format!("{}:{line}: {msg}", path.display()));
        if next()?.as_deref() != Some("kind,m,c,d") {
            return Err(bad(1, "expected header kind,m,c,d"));
        }
        let shape = next()?.ok_or_else(|| bad(2, "missing shape line"))?;
        let fields: Vec<&str> = shape.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(2, "shape line needs kind,m,c,d"));
        }
        let num = |s: &str| s.parse::<usize>().map_err(|_| bad(2, "shape entries must be integers"));
        let (m, c, d) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
        let mut rows = Vec::new();
        let mut line_no = 2;
        while let Some(line) = next()? {
            line_no += 1;
            if line.is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|v| v.parse::<f64>().map_err(|_| bad(line_no, "not a number")))
                .collect::<CliResult<Vec<f64>>>()?;
            if row.len() != d {
                return Err(bad(line_no, "row length differs from d"));
            }
            rows.push(row);
        }
        Ok(Self { kind: fields[0].to_string(), m, c, d, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.csv");
        let model = ModelFile::from_flat("binary", 2, 2, 3, &[0.1, -2.0, 3.5e-7, 1.0 / 3.0, 0.0, 1e300]);
        model.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("kind,m,c,d\nbinary,2,2,3\n"));
        assert_eq!(ModelFile::load(&path).unwrap(), model);
    }

    #[test]
    fn model_load_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "kind,m,c,d\nbinary,1,2,2\n1,2,3\n").unwrap();
        assert!(matches!(ModelFile::load(&path), Err(CliError::Config(_))));
        fs::write(&path, "m,c\n").unwrap();
        assert!(ModelFile::load(&path).is_err());
    }

    #[test]
    fn metrics_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let rows = vec![MetricsRecord { t: 1, loss: 0.5, grad_norm: 0.25, ms: 0.0 }];
        write_metrics(&path, &rows).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,loss,grad_norm,ms\n1,0.5,0.25,0\n");
    }
}
