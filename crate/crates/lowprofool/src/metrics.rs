//! Campaign evaluation: success rates, perturbation norm statistics,
//! nearest-neighbor context distances, and report assembly/rendering.

use ndarray::ArrayView1;
use serde::{Deserialize, Serialize};

use crate::attacks::{perceptibility, AttackOutcome, Method};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::importance::ImportanceVector;

/// Mean and population standard deviation of a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

fn mean_std(values: &[f64]) -> MeanStd {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    MeanStd {
        mean,
        std: var.sqrt(),
    }
}

/// One results-table row for one (dataset, method) campaign. Norm and
/// neighbor statistics cover successful attacks only and are absent when
/// nothing succeeded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub dataset_name: String,
    pub method_name: String,
    pub n_samples: usize,
    pub n_successes: usize,
    pub success_rate: f64,
    /// l2 norm of the perturbation (Mean column).
    pub mean_norm: Option<MeanStd>,
    /// Perceptibility d_v of the perturbation (WMean column).
    pub weighted_mean_norm: Option<MeanStd>,
    /// l2 distance from each original sample to its nearest neighbor (MD_O).
    pub mean_neighbor_dist: Option<MeanStd>,
    /// Weighted distance to the nearest neighbor under d_v (WMD_O).
    pub weighted_mean_neighbor_dist: Option<MeanStd>,
}

/// Fraction of outcomes that flipped the prediction.
pub fn success_rate(outcomes: &[AttackOutcome]) -> Result<f64> {
    if outcomes.is_empty() {
        return Err(Error::Data("no outcomes to evaluate".into()));
    }
    let wins = outcomes.iter().filter(|o| o.succeeded).count();
    Ok(wins as f64 / outcomes.len() as f64)
}

/// Norm statistics over the successful outcomes: `(l2, d_v)` pairs of
/// (mean, population std). `None` when no attack succeeded, mirroring the
/// "--" cells of a results table.
pub fn perturbation_stats(
    outcomes: &[AttackOutcome],
    v: &ImportanceVector,
    p: f64,
) -> Result<Option<(MeanStd, MeanStd)>> {
    let mut l2 = Vec::new();
    let mut dv = Vec::new();
    for outcome in outcomes.iter().filter(|o| o.succeeded) {
        l2.push(outcome.r.iter().map(|c| c * c).sum::<f64>().sqrt());
        dv.push(perceptibility(outcome.r.view(), v, p)?);
    }
    if l2.is_empty() {
        return Ok(None);
    }
    Ok(Some((mean_std(&l2), mean_std(&dv))))
}

/// Distance metric for the neighbor scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMetric {
    L2,
    Weighted,
}

/// Distance from `x` to its closest other row, by exhaustive scan. When
/// `x` is itself a row of the dataset the first exactly-equal row is
/// excluded, so a genuine duplicate still yields 0.
pub fn nearest_neighbor_distance(
    x: ArrayView1<f64>,
    data: &Dataset,
    v: &ImportanceVector,
    metric: NeighborMetric,
    p: f64,
) -> Result<f64> {
    let mut skipped_self = false;
    let mut best = f64::INFINITY;
    for row in data.x.rows() {
        if !skipped_self && row == x {
            skipped_self = true;
            continue;
        }
        let diff = &row - &x;
        let d = match metric {
            NeighborMetric::L2 => diff.iter().map(|c| c * c).sum::<f64>().sqrt(),
            NeighborMetric::Weighted => perceptibility(diff.view(), v, p)?,
        };
        if d < best {
            best = d;
        }
    }
    if !best.is_finite() {
        return Err(Error::Data(
            "nearest-neighbor scan needs at least one candidate row".into(),
        ));
    }
    Ok(best)
}

/// Assemble the full metric set for one campaign. Neighbor distances are
/// averaged over the original samples of successful pairs.
pub fn build_report(
    outcomes: &[AttackOutcome],
    data: &Dataset,
    v: &ImportanceVector,
    p: f64,
    dataset_name: &str,
    method: Method,
) -> Result<ExperimentReport> {
    let sr = success_rate(outcomes)?;
    let n_successes = outcomes.iter().filter(|o| o.succeeded).count();
    let norms = perturbation_stats(outcomes, v, p)?;

    let mut md = Vec::new();
    let mut wmd = Vec::new();
    for outcome in outcomes.iter().filter(|o| o.succeeded) {
        md.push(nearest_neighbor_distance(
            outcome.x_orig.view(),
            data,
            v,
            NeighborMetric::L2,
            p,
        )?);
        wmd.push(nearest_neighbor_distance(
            outcome.x_orig.view(),
            data,
            v,
            NeighborMetric::Weighted,
            p,
        )?);
    }
    let (mean_norm, weighted_mean_norm) = match norms {
        Some((l2, dv)) => (Some(l2), Some(dv)),
        None => (None, None),
    };
    Ok(ExperimentReport {
        dataset_name: dataset_name.to_string(),
        method_name: method.to_string(),
        n_samples: outcomes.len(),
        n_successes,
        success_rate: sr,
        mean_norm,
        weighted_mean_norm,
        mean_neighbor_dist: (!md.is_empty()).then(|| mean_std(&md)),
        weighted_mean_neighbor_dist: (!wmd.is_empty()).then(|| mean_std(&wmd)),
    })
}

fn cell(stat: Option<MeanStd>) -> String {
    match stat {
        Some(ms) => format!("{:.4} ({:.4})", ms.mean, ms.std),
        None => "--".to_string(),
    }
}

/// Aligned text table, one row per method, in the layout of the published
/// results: SR, Mean, WMean, MD_O, WMD_O.
pub fn render_table(reports: &[ExperimentReport]) -> String {
    let mut out = String::new();
    if let Some(first) = reports.first() {
        out.push_str(&format!("Dataset: {}\n", first.dataset_name));
    }
    out.push_str(&format!(
        "{:<12} {:>7} {:>17} {:>17} {:>17} {:>17}\n",
        "Method", "SR", "Mean", "WMean", "MD_O", "WMD_O"
    ));
    for report in reports {
        out.push_str(&format!(
            "{:<12} {:>7.3} {:>17} {:>17} {:>17} {:>17}\n",
            report.method_name,
            report.success_rate,
            cell(report.mean_norm),
            cell(report.weighted_mean_norm),
            cell(report.mean_neighbor_dist),
            cell(report.weighted_mean_neighbor_dist),
        ));
    }
    out
}

/// Per-dataset method comparison ratios (success rate and weighted mean
/// norm), one CSV row per metric.
pub fn write_ratio_csv(path: &std::path::Path, reports: &[ExperimentReport]) -> Result<()> {
    let find = |name: &str| reports.iter().find(|r| r.method_name == name);
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record([
        "metric",
        "lowprofool",
        "deepfool",
        "fgsm",
        "lowprofool_over_deepfool",
    ])?;

    let fmt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    let lpf = find(Method::LowProFool.as_str());
    let df = find(Method::DeepFool.as_str());
    let fg = find(Method::Fgsm.as_str());

    let sr = |r: Option<&ExperimentReport>| r.map(|r| r.success_rate);
    let ratio_sr = match (sr(lpf), sr(df)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    wtr.write_record([
        "success_rate".to_string(),
        fmt(sr(lpf)),
        fmt(sr(df)),
        fmt(sr(fg)),
        fmt(ratio_sr),
    ])?;

    let wmean = |r: Option<&ExperimentReport>| r.and_then(|r| r.weighted_mean_norm).map(|m| m.mean);
    let ratio_wmean = match (wmean(lpf), wmean(df)) {
        (Some(a), Some(b)) if b > 0.0 => Some(a / b),
        _ => None,
    };
    wtr.write_record([
        "weighted_mean_norm".to_string(),
        fmt(wmean(lpf)),
        fmt(wmean(df)),
        fmt(wmean(fg)),
        fmt(ratio_wmean),
    ])?;
    wtr.flush()?;
    Ok(())
}

/// Per-sample ratios of perturbation size to the sample's nearest-neighbor
/// distance, for successful outcomes: how far the attack moved relative to
/// the local data density.
pub fn write_neighbor_ratio_csv(
    path: &std::path::Path,
    method: Method,
    outcomes: &[AttackOutcome],
    data: &Dataset,
    v: &ImportanceVector,
    p: f64,
) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(["sample_index", "method", "l2_ratio", "weighted_ratio"])?;
    for (i, outcome) in outcomes.iter().enumerate() {
        if !outcome.succeeded {
            continue;
        }
        let l2 = outcome.r.iter().map(|c| c * c).sum::<f64>().sqrt();
        let dv = perceptibility(outcome.r.view(), v, p)?;
        let md = nearest_neighbor_distance(outcome.x_orig.view(), data, v, NeighborMetric::L2, p)?;
        let wmd =
            nearest_neighbor_distance(outcome.x_orig.view(), data, v, NeighborMetric::Weighted, p)?;
        let l2_ratio = if md > 0.0 { l2 / md } else { f64::NAN };
        let weighted_ratio = if wmd > 0.0 { dv / wmd } else { f64::NAN };
        wtr.write_record([
            format!("{i}"),
            method.to_string(),
            format!("{l2_ratio}"),
            format!("{weighted_ratio}"),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
