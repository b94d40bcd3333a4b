//! CSV datasets and coefficient files.
//!
//! A dataset file has a header row and columns `y, x1, ..., xd` with labels
//! in `1..=L`. A coefficient file holds `d` rows of `L` values without header,
//! next to a JSON sidecar with the same stem describing shape, centering and
//! penalty.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::data::{CoefficientMatrix, CoefficientMetadata, Dataset};
use crate::error::{Error, Result};
use crate::eval::csv_error;
use crate::penalty_spec::PenaltySpec;

fn parse_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line: line as usize,
        message: message.into(),
    }
}

fn open_reader(path: &Path, has_headers: bool) -> Result<csv::Reader<File>> {
    let file = File::open(path)?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn read_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_error(path, line, format!("{other:?}")),
    }
}

/// Reads a labelled dataset. `num_classes` defaults to the largest label present.
pub fn read_dataset_csv(path: impl AsRef<Path>, num_classes: Option<usize>) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = open_reader(path, true)?;
    let header = reader.headers().map_err(|e| read_error(path, e))?.clone();
    if header.get(0) != Some("y") {
        return Err(parse_error(path, 1, "first column must be named 'y'"));
    }
    let d = header.len() - 1;
    if d == 0 {
        return Err(parse_error(path, 1, "no feature columns"));
    }

    let mut labels: Vec<i64> = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| read_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != d + 1 {
            return Err(parse_error(
                path,
                line,
                format!("expected {} fields, found {}", d + 1, record.len()),
            ));
        }
        let y: i64 = record[0]
            .parse()
            .map_err(|_| parse_error(path, line, format!("label '{}' is not an integer", &record[0])))?;
        if y < 1 {
            return Err(parse_error(path, line, format!("label {y} is below 1")));
        }
        if let Some(l) = num_classes {
            if y as usize > l {
                return Err(parse_error(path, line, format!("label {y} exceeds L = {l}")));
            }
        }
        labels.push(y);
        for (k, field) in record.iter().enumerate().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_error(path, line, format!("column {} value '{field}' is not a number", k + 1)))?;
            if !v.is_finite() {
                return Err(parse_error(path, line, format!("column {} is not finite", k + 1)));
            }
            values.push(v);
        }
    }
    if labels.is_empty() {
        return Err(parse_error(path, 2, "dataset has no rows"));
    }
    let l = num_classes.unwrap_or_else(|| *labels.iter().max().expect("nonempty") as usize);
    let features = DMatrix::from_row_slice(labels.len(), d, &values);
    Dataset::from_one_based(features, &labels, l)
}

pub fn write_dataset_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
    let mut header = vec!["y".to_string()];
    header.extend((1..=data.d()).map(|j| format!("x{j}")));
    w.write_record(&header).map_err(csv_error)?;
    for (i, row) in data.features().row_iter().enumerate() {
        let mut rec = vec![(data.labels()[i] + 1).to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

/// Sidecar path of a coefficient file: same stem, `.json` extension.
pub fn sidecar_path(csv_path: impl AsRef<Path>) -> PathBuf {
    csv_path.as_ref().with_extension("json")
}

/// Writes the coefficient CSV and its sidecar; returns the sidecar path.
pub fn write_coefficients(
    path: impl AsRef<Path>,
    coefficients: &CoefficientMatrix,
    penalty: Option<&PenaltySpec>,
) -> Result<PathBuf> {
    let path = path.as_ref();
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(File::create(path)?));
    for row in coefficients.values().row_iter() {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_error)?;
    }
    w.flush()?;

    let meta = CoefficientMetadata {
        d: coefficients.d(),
        num_classes: coefficients.num_classes(),
        centered: coefficients.is_centered(),
        penalty: penalty.cloned(),
    };
    let sidecar = sidecar_path(path);
    let mut out = BufWriter::new(File::create(&sidecar)?);
    serde_json::to_writer_pretty(&mut out, &meta)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(sidecar)
}

/// Reads a coefficient CSV and its sidecar, checking that they agree.
pub fn read_coefficients(path: impl AsRef<Path>) -> Result<(CoefficientMatrix, CoefficientMetadata)> {
    let path = path.as_ref();
    let meta: CoefficientMetadata = serde_json::from_reader(File::open(sidecar_path(path))?)?;
    let mut reader = open_reader(path, false)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| read_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != meta.num_classes {
            return Err(parse_error(
                path,
                line,
                format!("expected {} values, found {}", meta.num_classes, record.len()),
            ));
        }
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| parse_error(path, line, format!("'{field}' is not a number")))?,
            );
        }
        rows += 1;
    }
    Error::check_dim("coefficient rows", meta.d, rows)?;
    let b = DMatrix::from_row_slice(rows, meta.num_classes, &values);
    let coefficients = if meta.centered {
        CoefficientMatrix::new_centered(b)?
    } else {
        CoefficientMatrix::new(b)?
    };
    Ok((coefficients, meta))
}
