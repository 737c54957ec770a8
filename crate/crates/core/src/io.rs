//! CSV ingestion and output, and model persistence.
//!
//! Floats in CSV outputs are written with 17 significant digits. The model
//! file is JSON with shortest round-trip floats, so a save/load cycle is
//! lossless and identical fits produce identical bytes.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mexico::{FitConfig, FittedModel, MixtureMatrix, ResponsibilityMatrix};
use crate::tail::{DataMatrix, Standardizer};

/// `x` with 17 significant digits in scientific notation.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_reader(path: &Path, has_header: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_header)
        .trim(csv::Trim::All)
        .flexible(true)
        .comment(None)
        .from_reader(file))
}

/// Reads a numeric matrix; errors name the offending line and column (both 1-based).
pub fn read_data_csv(path: &Path, has_header: bool) -> Result<DataMatrix> {
    let mut reader = csv_reader(path, has_header)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let mut row = Vec::with_capacity(record.len());
        for (c, field) in record.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::Csv(format!("{}: line {line}, column {}: cannot parse {field:?} as a number", path.display(), c + 1))
            })?;
            if !v.is_finite() {
                return Err(Error::Csv(format!("{}: line {line}, column {}: non-finite value", path.display(), c + 1)));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(Error::Csv(format!(
                    "{}: line {line} has {} columns, expected {w}",
                    path.display(),
                    row.len()
                )))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv(format!("{}: no data rows", path.display())));
    }
    DataMatrix::from_rows(&rows)
}

/// One non-negative integer label per line.
pub fn read_labels(path: &Path, has_header: bool) -> Result<Vec<usize>> {
    read_column(path, has_header, 0)
}

/// Integer column `col` (zero-based) of a CSV file.
pub fn read_column(path: &Path, has_header: bool, col: usize) -> Result<Vec<usize>> {
    let mut reader = csv_reader(path, has_header)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = record
            .get(col)
            .ok_or_else(|| Error::Csv(format!("{}: line {line} has no column {}", path.display(), col + 1)))?;
        let v = field.parse::<usize>().map_err(|_| {
            Error::Csv(format!("{}: line {line}, column {}: cannot parse {field:?} as a label", path.display(), col + 1))
        })?;
        out.push(v);
    }
    Ok(out)
}

/// Zero-based index of the header field `name`.
pub fn column_index(path: &Path, name: &str) -> Result<usize> {
    let mut reader = csv_reader(path, true)?;
    let headers = reader.headers().map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::Csv(format!("{}: no column named {name:?} in the header", path.display())))
}

/// Column `col` of a CSV file as floats.
pub fn read_float_column(path: &Path, has_header: bool, col: usize) -> Result<Vec<f64>> {
    let mut reader = csv_reader(path, has_header)?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let field = record
            .get(col)
            .ok_or_else(|| Error::Csv(format!("{}: line {line} has no column {}", path.display(), col + 1)))?;
        out.push(field.parse::<f64>().map_err(|_| {
            Error::Csv(format!("{}: line {line}, column {}: cannot parse {field:?}", path.display(), col + 1))
        })?);
    }
    Ok(out)
}

/// Writes rows of pre-formatted fields with an optional header.
pub fn write_csv<I, R>(path: &Path, header: Option<&[&str]>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::Writer::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    if let Some(h) = header {
        writer.write_record(h).map_err(|e| Error::Csv(e.to_string()))?;
    }
    for row in rows {
        writer.write_record(row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

/// A float matrix with 17 significant digits.
pub fn write_matrix_csv(path: &Path, header: Option<&[&str]>, m: ArrayView2<'_, f64>) -> Result<()> {
    write_csv(path, header, m.rows().into_iter().map(|r| r.iter().map(|&v| fmt17(v)).collect::<Vec<_>>()))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    write_csv(path, None, labels.iter().map(|l| vec![l.to_string()]))
}

const MODEL_FORMAT: &str = "mexico-model";
const MODEL_VERSION: u32 = 1;

/// On-disk layout of a [`FittedModel`]. Matrices are stored row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub p: usize,
    pub m: usize,
    pub k: usize,
    pub threshold: f64,
    pub converged: bool,
    pub config: FitConfig,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub objective_trace: Vec<f64>,
    /// Sorted training values per feature (the empirical quantile tables).
    pub standardizer: Option<Standardizer>,
}

fn rows_of(a: ArrayView2<'_, f64>) -> Vec<Vec<f64>> {
    a.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn matrix_from(rows: &[Vec<f64>], nrows: usize, ncols: usize, name: &str) -> Result<Array2<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Model(format!("{name} does not have shape {nrows}x{ncols}")));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Array2::from_shape_vec((nrows, ncols), flat).map_err(|e| Error::Model(e.to_string()))
}

impl ModelFile {
    pub fn from_model(model: &FittedModel) -> Self {
        let z = model.z.view();
        Self {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            p: model.p(),
            m: model.m(),
            k: z.ncols(),
            threshold: model.threshold,
            converged: model.converged,
            config: model.config.clone(),
            w: rows_of(model.w.view()),
            z: rows_of(z),
            objective_trace: model.objective_trace.clone(),
            standardizer: model.standardizer.clone(),
        }
    }

    pub fn into_model(self) -> Result<FittedModel> {
        if self.format != MODEL_FORMAT {
            return Err(Error::Model(format!("not a model file (format {:?})", self.format)));
        }
        if self.version != MODEL_VERSION {
            return Err(Error::Model(format!("unsupported model version {}", self.version)));
        }
        if let Some(st) = &self.standardizer {
            if st.p() != self.p {
                return Err(Error::Model(format!("quantile tables cover {} features, model has {}", st.p(), self.p)));
            }
        }
        let w = MixtureMatrix::new_unchecked_dims(matrix_from(&self.w, self.p, self.m, "W")?)?;
        let z = ResponsibilityMatrix::new(matrix_from(&self.z, self.m, self.k, "Z")?)?;
        Ok(FittedModel {
            w,
            z,
            threshold: self.threshold,
            config: self.config,
            objective_trace: self.objective_trace,
            converged: self.converged,
            standardizer: self.standardizer,
        })
    }
}

pub fn model_to_string(model: &FittedModel) -> Result<String> {
    serde_json::to_string_pretty(&ModelFile::from_model(model)).map_err(|e| Error::Model(e.to_string()))
}

pub fn save_model(path: &Path, model: &FittedModel) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(model_to_string(model)?.as_bytes())?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<FittedModel> {
    let text = std::fs::read_to_string(path)?;
    let file: ModelFile =
        serde_json::from_str(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))?;
    file.into_model()
}
