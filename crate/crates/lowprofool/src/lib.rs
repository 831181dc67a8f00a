//! Gradient-based evasion attacks on tabular classifiers, optimized to
//! stay imperceptible to expert scrutiny.
//!
//! The crate trains a small dense victim classifier on a tabular dataset,
//! derives per-feature importance weights from Pearson correlation with
//! the label, and generates adversarial examples that flip the model's
//! prediction while staying small under the importance-weighted norm, so
//! the edit concentrates on features an expert would scrutinize least.
//! Two classic gradient baselines and a metrics/reporting harness allow
//! side-by-side robustness benchmarking.
//!
//! Modules:
//! - [`data`]: CSV ingestion, min-max scaling, deterministic splits,
//!   synthetic dataset generation.
//! - [`importance`]: Pearson-correlation feature weights.
//! - [`model`]: the dense ReLU/softmax victim with exact input gradients.
//! - [`attacks`]: the weighted-norm attack plus the two baselines.
//! - [`metrics`]: success rates, norm statistics, neighbor distances,
//!   report rendering.
//! - [`harness`]: end-to-end experiment orchestration and artifacts.

pub mod attacks;
pub mod data;
pub mod error;
pub mod harness;
pub mod importance;
pub mod metrics;
pub mod model;

pub use error::{Error, Result};
