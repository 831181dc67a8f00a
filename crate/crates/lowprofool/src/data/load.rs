//! CSV ingestion guided by a small JSON schema.
//!
//! The schema names the binary target column and optionally assigns a
//! [`FeatureKind`] to any feature column; unlisted columns default to
//! continuous.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeatureKind;
use crate::error::{Error, Result};

/// Declared layout of a CSV file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    /// Name of the label column; its values must be 0 or 1.
    pub target: String,
    /// Feature kinds by column name; anything unlisted is continuous.
    #[serde(default)]
    pub columns: BTreeMap<String, FeatureKind>,
}

impl Schema {
    pub fn from_json_file(path: &Path) -> Result<Schema> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    fn kind_of(&self, column: &str) -> FeatureKind {
        self.columns
            .get(column)
            .copied()
            .unwrap_or(FeatureKind::Continuous)
    }
}

/// Column values before preprocessing.
#[derive(Debug, Clone)]
pub enum RawValues {
    Numeric(Vec<f64>),
    /// Unordered categoricals stay as strings; they are dropped later.
    Text(Vec<String>),
}

/// One CSV column with its declared kind.
#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub kind: FeatureKind,
    pub values: RawValues,
}

/// Parsed CSV: feature columns plus the extracted binary target.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub columns: Vec<RawColumn>,
    pub target: Vec<u8>,
    pub n_rows: usize,
}

/// Read a headered CSV into columns according to `schema`. Parse failures
/// are reported with the 1-based data row (excluding the header) and the
/// column name.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;

    let headers: Vec<String> = reader.headers()?.iter().map(|h| h.to_string()).collect();
    let target_pos = headers
        .iter()
        .position(|h| *h == schema.target)
        .ok_or_else(|| {
            Error::Schema(format!(
                "target column `{}` not found in header",
                schema.target
            ))
        })?;

    let mut columns: Vec<RawColumn> = headers
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != target_pos)
        .map(|(_, name)| {
            let kind = schema.kind_of(name);
            let values = if kind.is_numeric() {
                RawValues::Numeric(Vec::new())
            } else {
                RawValues::Text(Vec::new())
            };
            RawColumn {
                name: name.clone(),
                kind,
                values,
            }
        })
        .collect();
    let mut target: Vec<u8> = Vec::new();

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let row = row_idx + 1; // 1-based data row, header excluded
        if record.len() != headers.len() {
            return Err(Error::Parse {
                row,
                column: String::new(),
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        let mut col_cursor = 0usize;
        for (i, field) in record.iter().enumerate() {
            if i == target_pos {
                let label: i64 = field.parse().map_err(|_| Error::Parse {
                    row,
                    column: schema.target.clone(),
                    message: format!("target value `{field}` is not an integer"),
                })?;
                if label != 0 && label != 1 {
                    return Err(Error::Data(format!(
                        "target column `{}` must be binary (0/1), found {label} at row {row}",
                        schema.target
                    )));
                }
                target.push(label as u8);
                continue;
            }
            let col = &mut columns[col_cursor];
            col_cursor += 1;
            match &mut col.values {
                RawValues::Numeric(v) => {
                    let parsed: f64 = field.parse().map_err(|_| Error::Parse {
                        row,
                        column: col.name.clone(),
                        message: format!("`{field}` is not a number"),
                    })?;
                    if !parsed.is_finite() {
                        return Err(Error::Parse {
                            row,
                            column: col.name.clone(),
                            message: format!("`{field}` is not finite"),
                        });
                    }
                    v.push(parsed);
                }
                RawValues::Text(v) => v.push(field.to_string()),
            }
        }
    }

    let n_rows = target.len();
    if n_rows == 0 {
        return Err(Error::Data(format!("no data rows in {}", path.display())));
    }
    Ok(RawTable {
        columns,
        target,
        n_rows,
    })
}
