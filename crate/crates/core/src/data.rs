//! Datasets, the two synthetic generators, CSV ingestion and the R² metric.

use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::RandomStream;

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub x: Array2<f64>,
    pub y: Vec<f64>,
    pub feature_names: Vec<String>,
    pub target_name: String,
}

impl Dataset {
    pub fn new(
        x: Array2<f64>,
        y: Vec<f64>,
        feature_names: Vec<String>,
        target_name: String,
    ) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::InvalidData(format!(
                "dataset must have n >= 1 and p >= 1, got {}x{}",
                x.nrows(),
                x.ncols()
            )));
        }
        if y.len() != x.nrows() {
            return Err(Error::InvalidData(format!(
                "{} targets for {} rows",
                y.len(),
                x.nrows()
            )));
        }
        if feature_names.len() != x.ncols() {
            return Err(Error::InvalidData(format!(
                "{} feature names for {} columns",
                feature_names.len(),
                x.ncols()
            )));
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite value".into()));
        }
        Ok(Self {
            x,
            y,
            feature_names,
            target_name,
        })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn select(&self, rows: &[usize]) -> Self {
        Self {
            x: self.x.select(Axis(0), rows),
            y: rows.iter().map(|&i| self.y[i]).collect(),
            feature_names: self.feature_names.clone(),
            target_name: self.target_name.clone(),
        }
    }

    /// SHA-256 over the shape and the bit patterns of `x` (row-major) then `y`.
    pub fn fingerprint(&self) -> String {
        fingerprint(self.x.view(), &self.y)
    }
}

pub fn fingerprint(x: ArrayView2<'_, f64>, y: &[f64]) -> String {
    let mut h = Sha256::new();
    h.update((x.nrows() as u64).to_le_bytes());
    h.update((x.ncols() as u64).to_le_bytes());
    for v in x.iter().chain(y) {
        h.update(v.to_bits().to_le_bytes());
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn default_names(p: usize) -> Vec<String> {
    (1..=p).map(|j| format!("x{j}")).collect()
}

fn uniform_features(n: usize, p: usize, rng: &mut RandomStream) -> Array2<f64> {
    Array2::from_shape_fn((n, p), |_| rng.random_range(-1.0..=1.0))
}

/// `Y = X_1 + ... + X_10 + 1.8 eps` with `X ~ U[-1, 1]^p`.
pub fn generate_linear(n: usize, p: usize, rng: &mut RandomStream) -> Result<Dataset> {
    if p < 10 {
        return Err(Error::InvalidConfig(format!("linear model needs p >= 10, got {p}")));
    }
    let x = uniform_features(n, p, rng);
    let y = x
        .rows()
        .into_iter()
        .map(|r| {
            let eps: f64 = rng.sample(StandardNormal);
            r.iter().take(10).sum::<f64>() + 1.8 * eps
        })
        .collect();
    Dataset::new(x, y, default_names(p), "y".into())
}

/// `Y = 2 X_1 X_2 + 0.5 X_3 + 0.3 eps` with `X ~ U[-1, 1]^p`.
pub fn generate_xor(n: usize, p: usize, rng: &mut RandomStream) -> Result<Dataset> {
    if p < 3 {
        return Err(Error::InvalidConfig(format!("xor model needs p >= 3, got {p}")));
    }
    let x = uniform_features(n, p, rng);
    let y = x
        .rows()
        .into_iter()
        .map(|r| {
            let eps: f64 = rng.sample(StandardNormal);
            2.0 * r[0] * r[1] + 0.5 * r[2] + 0.3 * eps
        })
        .collect();
    Dataset::new(x, y, default_names(p), "y".into())
}

/// `1 - SSR / sum (y - mean(y))^2`.
pub fn r2_score(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidInput(format!(
            "{} truths but {} predictions",
            y_true.len(),
            y_pred.len()
        )));
    }
    if y_true.len() < 2 {
        return Err(Error::UndefinedMetric("R² needs at least two rows".into()));
    }
    let mean = y_true.iter().sum::<f64>() / y_true.len() as f64;
    let sst: f64 = y_true.iter().map(|t| (t - mean).powi(2)).sum();
    if sst <= 0.0 {
        return Err(Error::UndefinedMetric("targets have zero variance".into()));
    }
    let ssr: f64 = y_true.iter().zip(y_pred).map(|(t, p)| (t - p).powi(2)).sum();
    Ok(1.0 - ssr / sst)
}

/// A headed numeric table, row-major.
struct Table {
    headers: Vec<String>,
    values: Vec<f64>,
    n: usize,
}

fn read_table(path: &Path) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let headers: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    let mut values = Vec::new();
    let mut n = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        // 1-based data row number, not counting the header.
        let row = i + 1;
        for (j, cell) in record.iter().enumerate() {
            let v = cell
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumeric {
                    row,
                    column: headers[j].clone(),
                    value: cell.to_owned(),
                })?;
            values.push(v);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyFile(path.display().to_string()));
    }
    Ok(Table { headers, values, n })
}

impl Table {
    fn column_index(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_owned()))
    }

    fn select(&self, columns: &[usize]) -> Array2<f64> {
        let p = self.headers.len();
        Array2::from_shape_fn((self.n, columns.len()), |(i, j)| self.values[i * p + columns[j]])
    }
}

/// Reads a headed, comma-separated numeric file, splitting off `target_name`.
pub fn load_csv(path: impl AsRef<Path>, target_name: &str) -> Result<Dataset> {
    let table = read_table(path.as_ref())?;
    let target = table.column_index(target_name)?;
    let features: Vec<usize> = (0..table.headers.len()).filter(|&j| j != target).collect();
    let feature_names = features.iter().map(|&j| table.headers[j].clone()).collect();
    let x = table.select(&features);
    let y = table.select(&[target]).into_raw_vec_and_offset().0;
    Dataset::new(x, y, feature_names, target_name.to_owned())
}

/// Reads the named columns, in the given order, ignoring any others.
pub fn load_features(path: impl AsRef<Path>, names: &[String]) -> Result<Array2<f64>> {
    let table = read_table(path.as_ref())?;
    let columns = names
        .iter()
        .map(|name| table.column_index(name))
        .collect::<Result<Vec<_>>>()?;
    Ok(table.select(&columns))
}

/// Writes `columns` (name, values) as a headed CSV.
pub fn write_columns(path: impl AsRef<Path>, columns: &[(&str, &[f64])]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(columns.iter().map(|(name, _)| *name))?;
    let n = columns.first().map_or(0, |(_, v)| v.len());
    for i in 0..n {
        w.write_record(columns.iter().map(|(_, v)| v[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a dataset as `features..., target`.
pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(
        data.feature_names
            .iter()
            .map(String::as_str)
            .chain([data.target_name.as_str()]),
    )?;
    for (row, y) in data.x.rows().into_iter().zip(&data.y) {
        w.write_record(row.iter().chain([y]).map(f64::to_string))?;
    }
    w.flush()?;
    Ok(())
}
