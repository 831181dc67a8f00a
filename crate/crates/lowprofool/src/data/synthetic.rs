//! Synthetic two-class Gaussian data with a controllable degree of
//! class separation per feature, useful for benchmarking without real
//! datasets.

use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{ColumnScale, Dataset, FeatureKind, FeatureMeta};
use crate::error::{Error, Result};

/// Per-feature generation parameters. Feature `j` is drawn from
/// `N(-separations[j]/2, noise[j]^2)` for class 0 and
/// `N(+separations[j]/2, noise[j]^2)` for class 1, so larger separation
/// against noise means stronger class correlation.
#[derive(Debug, Clone)]
pub struct SyntheticSpec {
    pub separations: Vec<f64>,
    pub noise: Vec<f64>,
}

impl SyntheticSpec {
    pub fn n_features(&self) -> usize {
        self.separations.len()
    }
}

/// Generate `n` rows (labels alternate 0, 1, 0, 1, ...) and min-max scale
/// them like any other source. Deterministic in `seed`.
pub fn generate_synthetic(spec: &SyntheticSpec, n: usize, seed: u64) -> Result<Dataset> {
    let d = spec.n_features();
    if d < 2 {
        return Err(Error::Param(format!(
            "synthetic data needs at least 2 features, got {d}"
        )));
    }
    if spec.noise.len() != d {
        return Err(Error::Param(format!(
            "separations ({d}) and noise ({}) lengths differ",
            spec.noise.len()
        )));
    }
    if n < 4 {
        return Err(Error::Param(format!(
            "synthetic data needs at least 4 rows, got {n}"
        )));
    }
    if spec.noise.iter().any(|&s| s < 0.0) {
        return Err(Error::Param("noise levels must be non-negative".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut raw = Array2::zeros((n, d));
    let mut y = Array1::zeros(n);
    for i in 0..n {
        let label = (i % 2) as u8;
        let sign = if label == 1 { 1.0 } else { -1.0 };
        y[i] = label;
        for j in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            raw[[i, j]] = sign * spec.separations[j] / 2.0 + spec.noise[j] * z;
        }
    }

    let mut features = Vec::with_capacity(d);
    let mut scaling = Vec::with_capacity(d);
    let mut x = Array2::zeros((n, d));
    for j in 0..d {
        let col = raw.column(j);
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let cs = if max > min {
            ColumnScale {
                offset: min,
                scale: max - min,
            }
        } else {
            ColumnScale {
                offset: min,
                scale: 0.0,
            }
        };
        for i in 0..n {
            x[[i, j]] = cs.to_scaled(raw[[i, j]]);
        }
        features.push(FeatureMeta {
            name: format!("f{}", j + 1),
            kind: FeatureKind::Continuous,
            observed_min: min,
            observed_max: max,
        });
        scaling.push(cs);
    }

    Ok(Dataset {
        features,
        x,
        y,
        scaling,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::importance::pearson;

    #[test]
    fn shape_labels_and_range() {
        let spec = SyntheticSpec {
            separations: vec![2.0, 0.5],
            noise: vec![1.0, 1.0],
        };
        let ds = generate_synthetic(&spec, 100, 3).unwrap();
        assert_eq!(ds.n_rows(), 100);
        assert_eq!(ds.n_features(), 2);
        assert_eq!(ds.features[0].name, "f1");
        assert_eq!(ds.features[1].name, "f2");
        for i in 0..100 {
            assert_eq!(ds.y[i], (i % 2) as u8);
        }
        for &v in ds.x.iter() {
            assert!((0.0..=1.0).contains(&v), "scaled value out of range: {v}");
        }
    }

    #[test]
    fn determinism_in_seed() {
        let spec = SyntheticSpec {
            separations: vec![1.0, 1.0],
            noise: vec![1.0, 1.0],
        };
        let a = generate_synthetic(&spec, 50, 11).unwrap();
        let b = generate_synthetic(&spec, 50, 11).unwrap();
        assert_eq!(a.x, b.x);
        let c = generate_synthetic(&spec, 50, 12).unwrap();
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn separation_orders_label_correlation() {
        let spec = SyntheticSpec {
            separations: vec![3.0, 0.3],
            noise: vec![1.0, 1.0],
        };
        let ds = generate_synthetic(&spec, 600, 5).unwrap();
        let labels: Vec<f64> = ds.y.iter().map(|&l| l as f64).collect();
        let r1 = pearson(&ds.x.column(0).to_vec(), &labels).unwrap();
        let r2 = pearson(&ds.x.column(1).to_vec(), &labels).unwrap();
        assert!(
            r1.abs() > r2.abs(),
            "expected |rho1| > |rho2|, got {r1} vs {r2}"
        );
        assert!(r1.abs() > 0.6, "strongly separated feature: rho = {r1}");
    }

    #[test]
    fn zero_separation_gives_weak_correlation() {
        let spec = SyntheticSpec {
            separations: vec![0.0, 0.0],
            noise: vec![1.0, 1.0],
        };
        for seed in [1, 2, 3] {
            let ds = generate_synthetic(&spec, 500, seed).unwrap();
            let labels: Vec<f64> = ds.y.iter().map(|&l| l as f64).collect();
            for j in 0..2 {
                let r = pearson(&ds.x.column(j).to_vec(), &labels).unwrap();
                assert!(
                    r.abs() < 0.2,
                    "seed {seed} feature {j}: |rho| = {}",
                    r.abs()
                );
            }
        }
    }

    #[test]
    fn parameter_validation() {
        let ok = SyntheticSpec {
            separations: vec![1.0, 1.0],
            noise: vec![1.0, 1.0],
        };
        assert!(generate_synthetic(&ok, 3, 0).is_err());
        let short = SyntheticSpec {
            separations: vec![1.0],
            noise: vec![1.0],
        };
        assert!(generate_synthetic(&short, 10, 0).is_err());
        let mismatched = SyntheticSpec {
            separations: vec![1.0, 1.0],
            noise: vec![1.0],
        };
        assert!(generate_synthetic(&mismatched, 10, 0).is_err());
        let negative_noise = SyntheticSpec {
            separations: vec![1.0, 1.0],
            noise: vec![1.0, -0.5],
        };
        assert!(generate_synthetic(&negative_noise, 10, 0).is_err());
    }
}
