//! Feature files: a header `f0,f1,...` with an optional trailing `label`
//! column, then one row per sample.

use std::path::Path;

use ndarray::Array2;

use super::{Domain, LabeledDataset};
use crate::error::{HommError, Result};

fn format_err(path: &Path, message: impl Into<String>) -> HommError {
    HommError::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> HommError {
    HommError::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_features_csv(path: impl AsRef<Path>, domain: Domain) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => HommError::Io(io),
            other => format_err(path, format!("{other:?}")),
        })?;
    let header = reader
        .headers()
        .map_err(|e| format_err(path, e.to_string()))?
        .clone();
    let has_label = header.iter().next_back() == Some("label");
    let width = header.len() - usize::from(has_label);
    for (j, name) in header.iter().take(width).enumerate() {
        if name != format!("f{j}") {
            return Err(format_err(path, format!("column {j} is named {name:?}, expected \"f{j}\"")));
        }
    }
    if width == 0 {
        return Err(format_err(path, "no feature columns"));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(format_err(
                path,
                format!("line {line} has {} fields, header has {}", record.len(), header.len()),
            ));
        }
        for field in record.iter().take(width) {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(path, line, format!("invalid number {field:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(path, line, format!("non-finite value {field:?}")));
            }
            values.push(v);
        }
        if has_label {
            let field = &record[width];
            labels.push(
                field
                    .parse::<usize>()
                    .map_err(|_| parse_err(path, line, format!("invalid label {field:?}")))?,
            );
        }
    }
    if values.is_empty() {
        return Err(format_err(path, "no data rows"));
    }
    let rows = values.len() / width;
    let features = Array2::from_shape_vec((rows, width), values)
        .map_err(|e| format_err(path, e.to_string()))?;
    LabeledDataset::new(features, has_label.then_some(labels), domain)
}

/// Writes `dataset` in the format read by [`load_features_csv`]. Values are
/// written in shortest round-trip form, so a reload is bit-exact.
pub fn write_features_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let to_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => HommError::Io(io),
        other => format_err(path, format!("{other:?}")),
    };
    let mut writer = csv::Writer::from_path(path).map_err(to_err)?;
    let mut header: Vec<String> = (0..dataset.dim()).map(|j| format!("f{j}")).collect();
    if dataset.labels().is_some() {
        header.push("label".into());
    }
    writer.write_record(&header).map_err(to_err)?;
    let mut fields = Vec::with_capacity(header.len());
    for (i, row) in dataset.features().rows().into_iter().enumerate() {
        fields.clear();
        fields.extend(row.iter().map(|v| v.to_string()));
        if let Some(labels) = dataset.labels() {
            fields.push(labels[i].to_string());
        }
        writer.write_record(&fields).map_err(to_err)?;
    }
    writer.flush()?;
    Ok(())
}
