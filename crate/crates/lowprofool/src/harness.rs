//! End-to-end experiment orchestration: load data, train the victim,
//! tune attack hyperparameters on the validation split, run all methods
//! on the test split and write every artifact needed to reproduce the
//! run.

use std::path::{Path, PathBuf};

use ndarray::Array1;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::attacks::{run_campaign, AttackOutcome, AttackParams, Method, OutcomeRecord};
use crate::data::{
    generate_synthetic, load_csv, preprocess, split, DataSplit, Dataset, FeatureBounds, Schema,
    SyntheticSpec,
};
use crate::error::{Error, Result, StageContext};
use crate::importance::{importance_vector, ImportanceNorm, ImportanceVector};
use crate::metrics::{
    build_report, render_table, write_neighbor_ratio_csv, write_ratio_csv, ExperimentReport,
};
use crate::model::{Mlp, MlpConfig, TrainReport};

/// Independent sub-seed for a pipeline stage, all derived from one root
/// seed so a single integer reproduces the entire experiment.
pub fn derive_seed(root: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(stream);
    rng.next_u64()
}

/// Seed streams, fixed so artifacts stay reproducible across versions.
pub mod streams {
    pub const SPLIT: u64 = 1;
    pub const MODEL: u64 = 2;
    pub const SYNTH: u64 = 3;
}

/// Where the rows come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    /// CSV file plus the JSON schema naming the target column and feature
    /// kinds.
    Csv { data: PathBuf, schema: PathBuf },
    /// Generated two-class Gaussian data.
    Synthetic {
        separations: Vec<f64>,
        noise: Vec<f64>,
        n: usize,
    },
}

/// Victim-model settings; layer sizes are `[D, hidden..., 2]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSettings {
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
}

fn default_hidden() -> Vec<usize> {
    vec![64, 32]
}
fn default_learning_rate() -> f64 {
    0.05
}
fn default_epochs() -> usize {
    150
}
fn default_batch_size() -> usize {
    32
}

impl Default for ModelSettings {
    fn default() -> ModelSettings {
        ModelSettings {
            hidden: default_hidden(),
            learning_rate: default_learning_rate(),
            epochs: default_epochs(),
            batch_size: default_batch_size(),
        }
    }
}

impl ModelSettings {
    pub fn to_mlp_config(&self, d: usize, seed: u64) -> MlpConfig {
        let mut layer_sizes = Vec::with_capacity(self.hidden.len() + 2);
        layer_sizes.push(d);
        layer_sizes.extend_from_slice(&self.hidden);
        layer_sizes.push(2);
        MlpConfig {
            layer_sizes,
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed,
        }
    }
}

/// Validation-split search space for the trade-off factor and step scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TuningGrid {
    #[serde(default = "default_lambdas")]
    pub lambdas: Vec<f64>,
    #[serde(default = "default_alphas")]
    pub alphas: Vec<f64>,
}

fn default_lambdas() -> Vec<f64> {
    vec![0.1, 1.0, 5.0, 8.5, 20.0]
}
fn default_alphas() -> Vec<f64> {
    vec![1e-4, 1e-3, 1e-2]
}

impl Default for TuningGrid {
    fn default() -> TuningGrid {
        TuningGrid {
            lambdas: default_lambdas(),
            alphas: default_alphas(),
        }
    }
}

/// Full experiment description; serializable so a run can be reproduced
/// from its config snapshot alone.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Dataset name used in reports and artifact names.
    pub name: String,
    pub source: DataSource,
    #[serde(default)]
    pub model: ModelSettings,
    /// Base attack parameters; the tuned lambda and alpha override these
    /// for the importance-weighted attack.
    #[serde(default)]
    pub attack: AttackParams,
    /// Grid for validation-split tuning; `null` disables tuning and the
    /// base parameters are used as given.
    #[serde(default = "default_tuning")]
    pub tuning: Option<TuningGrid>,
    #[serde(default)]
    pub importance_norm: ImportanceNorm,
    #[serde(default)]
    pub seed: u64,
}

fn default_tuning() -> Option<TuningGrid> {
    Some(TuningGrid::default())
}

impl ExperimentConfig {
    pub fn from_json_file(path: &Path) -> Result<ExperimentConfig> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Everything produced by one experiment run.
pub struct ExperimentResult {
    pub reports: Vec<ExperimentReport>,
    pub params: AttackParams,
    pub train_report: TrainReport,
    pub outcomes: Vec<(Method, Vec<AttackOutcome>)>,
}

/// Load (or generate) the source dataset for a config.
pub fn load_source(config: &ExperimentConfig) -> Result<Dataset> {
    match &config.source {
        DataSource::Csv { data, schema } => {
            let schema = Schema::from_json_file(schema)?;
            let raw = load_csv(data, &schema)?;
            preprocess(&raw, &schema)
        }
        DataSource::Synthetic {
            separations,
            noise,
            n,
        } => {
            let spec = SyntheticSpec {
                separations: separations.clone(),
                noise: noise.clone(),
            };
            generate_synthetic(&spec, *n, derive_seed(config.seed, streams::SYNTH))
        }
    }
}

/// Split with the seed stream reserved for partitioning.
pub fn split_source(dataset: &Dataset, config: &ExperimentConfig) -> Result<DataSplit> {
    split(dataset, derive_seed(config.seed, streams::SPLIT))
}

/// Train the victim model on the train part.
pub fn train_victim(parts: &DataSplit, config: &ExperimentConfig) -> Result<(Mlp, TrainReport)> {
    let mlp_config = config.model.to_mlp_config(
        parts.train.n_features(),
        derive_seed(config.seed, streams::MODEL),
    );
    let mut mlp = Mlp::init(mlp_config)?;
    let report = mlp.train(&parts.train)?;
    Ok((mlp, report))
}

/// Grid search on the validation split: lexicographically best by success
/// rate (descending) then mean perceptibility over successes (ascending);
/// ties prefer smaller lambda, then smaller alpha.
pub fn tune_hyperparameters(
    mlp: &Mlp,
    validation: &Dataset,
    v: &ImportanceVector,
    grid: &TuningGrid,
    base: &AttackParams,
    bounds: &FeatureBounds,
) -> Result<AttackParams> {
    if grid.lambdas.is_empty() || grid.alphas.is_empty() {
        return Err(Error::Param("tuning grid must be nonempty".into()));
    }
    if validation.n_rows() == 0 {
        return Err(Error::Data("validation split is empty".into()));
    }

    struct Candidate {
        lambda: f64,
        alpha: f64,
        sr: f64,
        mean_dv: f64,
    }

    let mut best: Option<Candidate> = None;
    for &lambda in &grid.lambdas {
        for &alpha in &grid.alphas {
            let params = AttackParams {
                lambda,
                alpha,
                ..base.clone()
            };
            let outcomes = run_campaign(mlp, validation, v, &params, bounds, Method::LowProFool)?;
            let wins: Vec<&AttackOutcome> = outcomes.iter().filter(|o| o.succeeded).collect();
            let sr = wins.len() as f64 / outcomes.len() as f64;
            let mean_dv = if wins.is_empty() {
                f64::INFINITY
            } else {
                wins.iter().map(|o| o.d_v_value).sum::<f64>() / wins.len() as f64
            };
            let candidate = Candidate {
                lambda,
                alpha,
                sr,
                mean_dv,
            };
            let replace = match &best {
                None => true,
                Some(b) => (candidate.sr, b.mean_dv, b.lambda, b.alpha)
                    .partial_cmp(&(b.sr, candidate.mean_dv, candidate.lambda, candidate.alpha))
                    .expect("tuning metrics are never NaN")
                    .is_gt(),
            };
            if replace {
                best = Some(candidate);
            }
        }
    }
    let best = best.expect("grid verified nonempty");
    log::info!(
        "tuned lambda = {}, alpha = {} (validation sr {:.3}, mean d_v {:.5})",
        best.lambda,
        best.alpha,
        best.sr,
        best.mean_dv
    );
    Ok(AttackParams {
        lambda: best.lambda,
        alpha: best.alpha,
        ..base.clone()
    })
}

/// Final coherence gate: refuse to serialize any successful adversarial
/// row that escaped its feature bounds.
fn check_outcomes_in_bounds(outcomes: &[AttackOutcome], bounds: &FeatureBounds) -> Result<()> {
    for (index, outcome) in outcomes.iter().enumerate() {
        if let Some(adv) = &outcome.x_adv {
            if let Some(feature) = bounds.first_violation(adv.view()) {
                return Err(Error::BoundsViolation { index, feature });
            }
        }
    }
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Write one campaign's outcome records, bounds-gated.
pub fn write_outcomes(
    path: &Path,
    method: Method,
    outcomes: &[AttackOutcome],
    bounds: &FeatureBounds,
) -> Result<()> {
    check_outcomes_in_bounds(outcomes, bounds)?;
    let records: Vec<OutcomeRecord> = outcomes
        .iter()
        .enumerate()
        .map(|(i, o)| OutcomeRecord::from_outcome(i, method, o))
        .collect();
    write_json(path, &records)
}

fn outcomes_from_records(
    records: &[OutcomeRecord],
    test: &Dataset,
    mlp: &Mlp,
    v: &ImportanceVector,
    norm_p: f64,
) -> Result<Vec<AttackOutcome>> {
    let mut outcomes = Vec::with_capacity(records.len());
    for record in records {
        if record.sample_index >= test.n_rows() {
            return Err(Error::Data(format!(
                "outcome record points at row {} of a {}-row test split",
                record.sample_index,
                test.n_rows()
            )));
        }
        let x_orig = test.x.row(record.sample_index);
        let source_label = mlp.predict(x_orig)?;
        let target_label = 1 - source_label;
        let outcome = match &record.x_adv {
            Some(adv) => {
                if adv.len() != x_orig.len() {
                    return Err(Error::ShapeMismatch {
                        expected: x_orig.len(),
                        actual: adv.len(),
                    });
                }
                AttackOutcome::build(
                    x_orig,
                    source_label,
                    target_label,
                    Array1::from_vec(adv.clone()),
                    record.succeeded,
                    record.iterations,
                    v,
                    norm_p,
                )?
            }
            // failures carry no adversarial point, so keep the recorded
            // diagnostics instead of recomputing them from a zero vector
            None => AttackOutcome {
                x_orig: x_orig.to_owned(),
                source_label,
                target_label,
                succeeded: false,
                x_adv: None,
                r: Array1::zeros(x_orig.len()),
                iterations_used: record.iterations,
                d_v_value: record.d_v,
                l2_norm: record.l2_norm,
            },
        };
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

/// Rebuild the report tables from a run directory alone. The config
/// snapshot reproduces the dataset and split, the saved model resolves
/// source labels and the outcome records carry the adversarial points,
/// so the recomputed statistics match the original run bit for bit.
pub fn evaluate_artifacts(dir: &Path) -> Result<Vec<ExperimentReport>> {
    let config = ExperimentConfig::from_json_file(&dir.join("config.json")).stage("config")?;
    let dataset = load_source(&config).stage("load")?;
    let parts = split_source(&dataset, &config).stage("split")?;
    let v = importance_vector(&parts.train, config.importance_norm).stage("importance")?;
    let mlp = Mlp::load(&dir.join("model.json")).stage("model")?;

    let mut reports = Vec::new();
    for method in Method::ALL {
        let path = dir.join(format!("outcomes_{method}.json"));
        if !path.exists() {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        let records: Vec<OutcomeRecord> = serde_json::from_str(&text)?;
        let outcomes = outcomes_from_records(&records, &parts.test, &mlp, &v, config.attack.norm_p)
            .stage("evaluate")?;
        let report = build_report(
            &outcomes,
            &parts.test,
            &v,
            config.attack.norm_p,
            &config.name,
            method,
        )
        .stage("report")?;
        reports.push(report);
    }
    if reports.is_empty() {
        return Err(Error::Data(format!(
            "no outcome artifacts in {}",
            dir.display()
        )));
    }
    Ok(reports)
}

/// Run the full pipeline with all three methods. When `out_dir` is given,
/// all artifacts (config snapshot, model, importance CSV, per-method
/// outcomes, reports, plot CSVs) are written there.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
) -> Result<ExperimentResult> {
    run_experiment_with_methods(config, out_dir, &Method::ALL)
}

/// As [`run_experiment`], restricted to a subset of attack methods.
pub fn run_experiment_with_methods(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
    methods: &[Method],
) -> Result<ExperimentResult> {
    if methods.is_empty() {
        return Err(Error::Param("no attack methods selected".into()));
    }
    config.attack.validate().stage("config")?;
    let dataset = load_source(config).stage("load")?;
    // split() hands out disjoint index sets by construction, so nothing
    // from the test split can leak into training, importance or tuning
    let parts = split_source(&dataset, config).stage("split")?;
    // natural per-feature range of the dataset at hand
    let bounds = dataset.feature_bounds();

    let v = importance_vector(&parts.train, config.importance_norm).stage("importance")?;
    let (mlp, train_report) = train_victim(&parts, config).stage("train")?;

    let params = match &config.tuning {
        Some(grid) => {
            tune_hyperparameters(&mlp, &parts.validation, &v, grid, &config.attack, &bounds)
                .stage("tune")?
        }
        None => config.attack.clone(),
    };

    let mut outcomes = Vec::new();
    let mut reports = Vec::new();
    for &method in methods {
        let campaign =
            run_campaign(&mlp, &parts.test, &v, &params, &bounds, method).stage("campaign")?;
        let report = build_report(
            &campaign,
            &parts.test,
            &v,
            params.norm_p,
            &config.name,
            method,
        )
        .stage("report")?;
        reports.push(report);
        outcomes.push((method, campaign));
    }

    if let Some(dir) = out_dir {
        write_artifacts(
            dir, config, &params, &mlp, &v, &parts, &bounds, &outcomes, &reports,
        )
        .stage("write")?;
    }

    Ok(ExperimentResult {
        reports,
        params,
        train_report,
        outcomes,
    })
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    dir: &Path,
    config: &ExperimentConfig,
    params: &AttackParams,
    mlp: &Mlp,
    v: &ImportanceVector,
    parts: &DataSplit,
    bounds: &FeatureBounds,
    outcomes: &[(Method, Vec<AttackOutcome>)],
    reports: &[ExperimentReport],
) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    // config snapshot with the tuned parameters substituted in, so the
    // run reproduces without re-tuning
    let mut snapshot = config.clone();
    snapshot.attack = params.clone();
    write_json(&dir.join("config.json"), &snapshot)?;

    mlp.save(&dir.join("model.json"))?;

    let names: Vec<String> = parts
        .train
        .features
        .iter()
        .map(|f| f.name.clone())
        .collect();
    v.save_csv(&dir.join("importance.csv"), &names)?;

    for (method, campaign) in outcomes {
        write_outcomes(
            &dir.join(format!("outcomes_{method}.json")),
            *method,
            campaign,
            bounds,
        )?;
        write_neighbor_ratio_csv(
            &dir.join(format!("neighbor_ratio_{method}.csv")),
            *method,
            campaign,
            &parts.test,
            v,
            params.norm_p,
        )?;
    }

    write_json(&dir.join("report.json"), &reports)?;
    std::fs::write(dir.join("report.txt"), render_table(reports))?;
    write_ratio_csv(&dir.join("ratios.csv"), reports)?;
    Ok(())
}
