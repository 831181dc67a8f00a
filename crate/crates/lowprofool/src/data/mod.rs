//! Tabular dataset ingestion, preprocessing and splitting.
//!
//! The attacks operate on numeric continuous data: unordered categorical
//! columns are dropped, everything else is cast to reals and min-max scaled
//! to `[0, 1]`. Scaling parameters are kept so rows can be mapped back to
//! raw units.

mod load;
mod synthetic;

pub use load::{load_csv, RawColumn, RawTable, RawValues, Schema};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use ndarray::{Array1, Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What kind of values a column holds, which decides how it is preprocessed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Discrete,
    CategoricalOrdered,
    CategoricalUnordered,
}

impl FeatureKind {
    /// Unordered categoricals are dropped; everything else is kept as reals.
    pub fn is_numeric(self) -> bool {
        self != FeatureKind::CategoricalUnordered
    }

    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Continuous => "continuous",
            FeatureKind::Discrete => "discrete",
            FeatureKind::CategoricalOrdered => "categorical_ordered",
            FeatureKind::CategoricalUnordered => "categorical_unordered",
        }
    }
}

/// Per-feature metadata, observed extrema are in raw units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureMeta {
    pub name: String,
    pub kind: FeatureKind,
    pub observed_min: f64,
    pub observed_max: f64,
}

/// Affine map between raw and scaled units for one column:
/// `scaled = (raw - offset) / scale`. A `scale` of zero marks a constant
/// (degenerate) column, which maps to 0.0 in scaled space.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ColumnScale {
    pub offset: f64,
    pub scale: f64,
}

impl ColumnScale {
    pub fn is_degenerate(&self) -> bool {
        self.scale == 0.0
    }

    pub fn to_scaled(&self, raw: f64) -> f64 {
        if self.is_degenerate() {
            0.0
        } else {
            (raw - self.offset) / self.scale
        }
    }

    pub fn to_raw(&self, scaled: f64) -> f64 {
        scaled * self.scale + self.offset
    }
}

/// Preprocessed dataset: rows in `[0, 1]` scaled space, binary labels.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Vec<FeatureMeta>,
    /// N x D matrix in scaled space.
    pub x: Array2<f64>,
    /// Length-N labels in {0, 1}.
    pub y: Array1<u8>,
    /// Per-column raw-to-scaled maps, aligned with `features`.
    pub scaling: Vec<ColumnScale>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.x.ncols()
    }

    /// Map a scaled row back to raw units.
    pub fn unscale_row(&self, row: ArrayView1<f64>) -> Vec<f64> {
        row.iter()
            .zip(&self.scaling)
            .map(|(&s, cs)| cs.to_raw(s))
            .collect()
    }

    /// Per-feature `[lo, hi]` in scaled space, taken over the rows at hand.
    pub fn feature_bounds(&self) -> FeatureBounds {
        let d = self.n_features();
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for row in self.x.rows() {
            for (j, &val) in row.iter().enumerate() {
                if val < lo[j] {
                    lo[j] = val;
                }
                if val > hi[j] {
                    hi[j] = val;
                }
            }
        }
        FeatureBounds { lo, hi }
    }

    /// Dataset restricted to the given row indices (metadata shared).
    fn subset(&self, indices: &[usize]) -> Dataset {
        let d = self.n_features();
        let mut x = Array2::zeros((indices.len(), d));
        let mut y = Array1::zeros(indices.len());
        for (out, &i) in indices.iter().enumerate() {
            x.row_mut(out).assign(&self.x.row(i));
            y[out] = self.y[i];
        }
        Dataset {
            features: self.features.clone(),
            x,
            y,
            scaling: self.scaling.clone(),
        }
    }

    /// Persist the scaled matrix with its labels as CSV, plus a sidecar
    /// `<path>.scaling.csv` holding per-feature offset/scale/kind records.
    pub fn save_csv(&self, path: &std::path::Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        let mut header: Vec<&str> = self.features.iter().map(|f| f.name.as_str()).collect();
        header.push("label");
        wtr.write_record(&header)?;
        for (row, &label) in self.x.rows().into_iter().zip(self.y.iter()) {
            let mut rec: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            rec.push(format!("{label}"));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;

        let sidecar = sidecar_path(path);
        let mut wtr = csv::Writer::from_path(&sidecar)?;
        wtr.write_record(["name", "kind", "offset", "scale"])?;
        for (meta, cs) in self.features.iter().zip(&self.scaling) {
            wtr.write_record([
                meta.name.as_str(),
                meta.kind.as_str(),
                &format!("{}", cs.offset),
                &format!("{}", cs.scale),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn sidecar_path(path: &std::path::Path) -> std::path::PathBuf {
    let mut name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    name.push_str(".scaling.csv");
    path.with_file_name(name)
}

/// Inclusive per-feature coordinate bounds in scaled space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureBounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl FeatureBounds {
    pub fn new(pairs: Vec<(f64, f64)>) -> Result<FeatureBounds> {
        if pairs
            .iter()
            .any(|&(lo, hi)| lo > hi || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::Param("bounds must be finite with lo <= hi".into()));
        }
        let (lo, hi) = pairs.into_iter().unzip();
        Ok(FeatureBounds { lo, hi })
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn get(&self, j: usize) -> (f64, f64) {
        (self.lo[j], self.hi[j])
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// True when every coordinate of `x` lies inside `[lo_j, hi_j]`.
    pub fn contains(&self, x: ArrayView1<f64>) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(&v, (&lo, &hi))| v >= lo && v <= hi)
    }

    /// Index of the first out-of-bounds coordinate, if any.
    pub fn first_violation(&self, x: ArrayView1<f64>) -> Option<usize> {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .position(|(&v, (&lo, &hi))| v < lo || v > hi)
    }
}

/// Disjoint train/test/validation partition of a source dataset.
#[derive(Debug, Clone)]
pub struct DataSplit {
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
    pub seed: u64,
}

/// Sizes of the test and validation parts for a source of `n` rows:
/// the fixed 250/50 when there is room, a proportional 25%/5% fallback
/// otherwise.
fn split_sizes(n: usize) -> (usize, usize) {
    if n >= 350 {
        (250, 50)
    } else {
        (n / 4, n / 20)
    }
}

/// Deterministic shuffled split; the same seed always yields the same
/// row assignment.
pub fn split(dataset: &Dataset, seed: u64) -> Result<DataSplit> {
    let n = dataset.n_rows();
    if n < 20 {
        return Err(Error::Data(format!(
            "dataset too small to split: {n} rows (need at least 20)"
        )));
    }
    let (n_test, n_val) = split_sizes(n);

    let mut indices: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    indices.shuffle(&mut rng);

    let test_idx = &indices[..n_test];
    let val_idx = &indices[n_test..n_test + n_val];
    let train_idx = &indices[n_test + n_val..];

    Ok(DataSplit {
        train: dataset.subset(train_idx),
        test: dataset.subset(test_idx),
        validation: dataset.subset(val_idx),
        seed,
    })
}

/// Min-max scale the raw numeric columns to `[0, 1]` and assemble a
/// [`Dataset`]. Constant columns are scaled to 0.0 (never dropped) so
/// column alignment with the schema survives.
pub fn preprocess(raw: &RawTable, schema: &Schema) -> Result<Dataset> {
    let kept: Vec<&RawColumn> = raw.columns.iter().filter(|c| c.kind.is_numeric()).collect();
    for col in &raw.columns {
        if !col.kind.is_numeric() {
            log::info!("dropping unordered categorical column `{}`", col.name);
        }
    }
    if kept.is_empty() {
        return Err(Error::Data(
            "all features dropped during preprocessing".into(),
        ));
    }
    let n = raw.n_rows;
    if n == 0 {
        return Err(Error::Data("empty dataset".into()));
    }
    let _ = schema; // kinds were already attached to the columns at load time

    let d = kept.len();
    let mut features = Vec::with_capacity(d);
    let mut scaling = Vec::with_capacity(d);
    let mut x = Array2::zeros((n, d));

    for (j, col) in kept.iter().enumerate() {
        let values = match &col.values {
            RawValues::Numeric(v) => v,
            RawValues::Text(_) => {
                return Err(Error::Schema(format!(
                    "column `{}` is marked numeric but holds text",
                    col.name
                )))
            }
        };
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cs = if max > min {
            ColumnScale {
                offset: min,
                scale: max - min,
            }
        } else {
            log::warn!(
                "column `{}` is constant ({min}); scaling it to 0.0",
                col.name
            );
            ColumnScale {
                offset: min,
                scale: 0.0,
            }
        };
        for (i, &v) in values.iter().enumerate() {
            x[[i, j]] = cs.to_scaled(v);
        }
        features.push(FeatureMeta {
            name: col.name.clone(),
            kind: col.kind,
            observed_min: min,
            observed_max: max,
        });
        scaling.push(cs);
    }

    Ok(Dataset {
        features,
        x,
        y: Array1::from_vec(raw.target.clone()),
        scaling,
    })
}
