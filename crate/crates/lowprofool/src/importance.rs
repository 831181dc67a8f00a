//! Feature-importance vectors derived from Pearson correlation with the
//! target label.
//!
//! The weight vector `v` models how closely an expert would scrutinize
//! each feature: strongly label-correlated features get large weights and
//! are therefore expensive to perturb under the weighted norm.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Entries below this after normalization are lifted to keep `v` strictly
/// positive, as the weighted norm requires.
pub const IMPORTANCE_FLOOR: f64 = 1e-6;

/// How the absolute-correlation vector is normalized.
///
/// `UnitL2` divides by the l2 norm so that `v` is a unit vector.
/// `AsPrinted` divides by the squared l2 norm instead; both are exposed
/// because published descriptions of this weighting disagree between the
/// two, and they only coincide when the norm is exactly 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceNorm {
    #[default]
    UnitL2,
    AsPrinted,
}

/// Per-feature weights plus the raw correlations they came from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ImportanceVector {
    pub v: Vec<f64>,
    pub rho: Vec<f64>,
    pub normalization: ImportanceNorm,
}

impl ImportanceVector {
    pub fn len(&self) -> usize {
        self.v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }

    pub fn weights(&self) -> Array1<f64> {
        Array1::from_vec(self.v.clone())
    }

    /// Export `(name, rho, v)` rows for audit.
    pub fn save_csv(&self, path: &std::path::Path, names: &[String]) -> Result<()> {
        if names.len() != self.v.len() {
            return Err(Error::ShapeMismatch {
                expected: self.v.len(),
                actual: names.len(),
            });
        }
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["feature", "rho", "v"])?;
        for ((name, &rho), &v) in names.iter().zip(&self.rho).zip(&self.v) {
            wtr.write_record([name.as_str(), &format!("{rho}"), &format!("{v}")])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Sample Pearson correlation of two equal-length sequences. When either
/// sequence has zero variance the correlation is undefined; 0.0 is
/// returned by convention (such a feature carries no label information).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::ShapeMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::Param(format!(
            "pearson needs at least 2 observations, got {n}"
        )));
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Compute `v = normalize(|rho|)` over the dataset's feature columns
/// against its labels, then lift any zero entry to [`IMPORTANCE_FLOOR`].
pub fn importance_vector(
    dataset: &Dataset,
    normalization: ImportanceNorm,
) -> Result<ImportanceVector> {
    let d = dataset.n_features();
    if d == 0 {
        return Err(Error::Data("dataset has no features".into()));
    }
    let labels: Vec<f64> = dataset.y.iter().map(|&l| l as f64).collect();
    let mut rho = Vec::with_capacity(d);
    for j in 0..d {
        let col: Vec<f64> = dataset.x.column(j).to_vec();
        rho.push(pearson(&col, &labels)?);
    }

    let norm_sq: f64 = rho.iter().map(|r| r * r).sum();
    if norm_sq == 0.0 {
        return Err(Error::NoCorrelation);
    }
    let denom = match normalization {
        ImportanceNorm::UnitL2 => norm_sq.sqrt(),
        ImportanceNorm::AsPrinted => norm_sq,
    };
    let v: Vec<f64> = rho
        .iter()
        .map(|r| {
            let w = r.abs() / denom;
            if w == 0.0 {
                IMPORTANCE_FLOOR
            } else {
                w
            }
        })
        .collect();

    Ok(ImportanceVector {
        v,
        rho,
        normalization,
    })
}
