//! Readers and writers for the on-disk formats: feature CSVs, instance
//! JSON documents, and rating-matrix CSVs.

use std::fs;
use std::path::{Path, PathBuf};

use semibai_core::envs::{RatingMatrix, ShiftKind};
use semibai_core::FeatureSet;

use crate::{Error, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { path: path.to_path_buf(), line, msg: msg.into() }
}

/// Read a feature set from CSV: header `f0,f1,...,f{d-1}`, one vector per
/// row. The header fixes the dimension; every row must parse as floats.
pub fn load_features_csv(path: &Path) -> Result<FeatureSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let dim = headers.len();
    for (i, name) in headers.iter().enumerate() {
        let expected = format!("f{i}");
        if name != expected {
            return Err(parse_err(path, 1, format!("expected header column {expected:?}, found {name:?}")));
        }
    }
    let mut vectors = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != dim {
            return Err(parse_err(path, line, format!("expected {dim} fields, found {}", record.len())));
        }
        let mut v = Vec::with_capacity(dim);
        for field in record.iter() {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))?;
            v.push(value);
        }
        vectors.push(v);
    }
    Ok(FeatureSet::new(dim, vectors)?)
}

/// Write a feature set in the format [`load_features_csv`] reads.
pub fn save_features_csv(path: &Path, features: &FeatureSet) -> Result<()> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = (0..features.dim).map(|i| format!("f{i}")).collect();
    writer.write_record(&header).map_err(|e| csv_error(path, e))?;
    for row in &features.vectors {
        let fields: Vec<String> = row.iter().map(|x| x.to_string()).collect();
        writer.write_record(&fields).map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(io_err(path))?;
    Ok(())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e
        .position()
        .map(|p| p.line() as usize)
        .unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        kind => parse_err(path, line, format!("{kind:?}")),
    }
}

/// A full simulated-environment description.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct InstanceFile {
    pub source: FeatureSet,
    pub targets: FeatureSet,
    pub theta_star: Vec<f64>,
    pub shift: ShiftKind,
    pub noise_std: f64,
}

/// Read an [`InstanceFile`] JSON document.
pub fn load_instance_json(path: &Path) -> Result<InstanceFile> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
}

/// Write an [`InstanceFile`] JSON document.
pub fn save_instance_json(path: &Path, instance: &InstanceFile) -> Result<()> {
    let text = serde_json::to_string_pretty(instance)
        .map_err(|source| Error::Json { path: path.to_path_buf(), source })?;
    fs::write(path, text).map_err(io_err(path))?;
    Ok(())
}

/// Read a rating matrix from CSV.
///
/// The header row names the items. With `user_id_column` the first column is
/// an identifier and is skipped. Every remaining cell must parse as a float;
/// cells equal to `missing_marker` become missing entries. Malformed cells
/// report their line number.
pub fn load_ratings_csv(
    path: &Path,
    missing_marker: f64,
    user_id_column: bool,
) -> Result<RatingMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let skip = usize::from(user_id_column);
    if headers.len() <= skip {
        return Err(parse_err(path, 1, "no item columns"));
    }
    let labels: Vec<String> = headers.iter().skip(skip).map(str::to_owned).collect();

    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| csv_error(path, e))?;
        if record.len() != headers.len() {
            return Err(parse_err(
                path,
                line,
                format!("expected {} fields, found {}", headers.len(), record.len()),
            ));
        }
        let mut row = Vec::with_capacity(labels.len());
        for field in record.iter().skip(skip) {
            let value: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("not a number: {field:?}")))?;
            row.push(if value == missing_marker { None } else { Some(value) });
        }
        rows.push(row);
    }
    Ok(RatingMatrix::new(rows, labels)?)
}

/// The path's parent directory, created if needed.
pub(crate) fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| Error::Io {
                path: PathBuf::from(parent),
                source,
            })?;
        }
    }
    Ok(())
}
