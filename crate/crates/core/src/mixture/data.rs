use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MixError, Result};

/// n × r matrix of observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    dim: usize,
    values: Vec<f64>,
}

impl Dataset {
    /// Row-major values; `values.len()` must be a multiple of `dim`.
    pub fn new(name: impl Into<String>, dim: usize, values: Vec<f64>) -> Result<Self> {
        if dim == 0 || values.is_empty() || values.len() % dim != 0 {
            return Err(MixError::InvalidData(format!(
                "{} values cannot form rows of dimension {dim}",
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(MixError::InvalidData(format!(
                "non-finite entry in row {}",
                pos / dim + 1
            )));
        }
        Ok(Dataset {
            name: name.into(),
            dim,
            values,
        })
    }

    pub fn univariate(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        Dataset::new(name, 1, values)
    }

    pub fn from_rows(name: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(MixError::InvalidData("rows differ in length".into()));
        }
        Dataset::new(name, dim, rows.concat())
    }

    /// Reads comma-separated rows. A first row with no numeric field is
    /// taken as a header and skipped.
    pub fn from_csv_reader<R: Read>(name: impl Into<String>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.iter().all(str::is_empty) {
                continue;
            }
            if dim.is_none() && values.is_empty() && rec.iter().all(|f| f.parse::<f64>().is_err()) {
                dim = Some(rec.len());
                continue;
            }
            match dim {
                None => dim = Some(rec.len()),
                Some(d) if d != rec.len() => {
                    return Err(MixError::InvalidData(format!(
                        "line {}: expected {d} fields, found {}",
                        line + 1,
                        rec.len()
                    )))
                }
                _ => {}
            }
            for field in rec.iter() {
                let v: f64 = field.parse().map_err(|_| {
                    MixError::InvalidData(format!("line {}: cannot parse `{field}`", line + 1))
                })?;
                values.push(v);
            }
        }
        let dim = dim.ok_or_else(|| MixError::InvalidData("no observations".into()))?;
        Dataset::new(name, dim, values)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let name = path
            .file_stem()
            .map_or_else(|| "data".to_string(), |s| s.to_string_lossy().into_owned());
        Dataset::from_csv_reader(name, std::fs::File::open(path)?)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.dim)
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Column means and the row-major sample covariance (divisor n).
    pub fn moments(&self) -> (Vec<f64>, Vec<f64>) {
        let (n, r) = (self.n() as f64, self.dim);
        let mut mean = vec![0.0; r];
        for row in self.rows() {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v / n;
            }
        }
        let mut cov = vec![0.0; r * r];
        for row in self.rows() {
            for a in 0..r {
                for b in 0..r {
                    cov[a * r + b] += (row[a] - mean[a]) * (row[b] - mean[b]) / n;
                }
            }
        }
        (mean, cov)
    }

    /// (min, max) of a univariate dataset's first column.
    pub fn range(&self) -> (f64, f64) {
        self.rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r[0]), hi.max(r[0]))
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in self.rows() {
            wtr.write_record(row.iter().map(f64::to_string))?;
        }
        wtr.flush()?;
        Ok(())
    }
}
