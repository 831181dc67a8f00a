//! Command-line front end for the attack pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lowprofool::attacks::{ClipMode, Method};
use lowprofool::data::{generate_synthetic, SyntheticSpec};
use lowprofool::harness::{
    derive_seed, evaluate_artifacts, load_source, run_experiment_with_methods, split_source,
    streams, train_victim, DataSource, ExperimentConfig,
};
use lowprofool::importance::{importance_vector, ImportanceNorm};
use lowprofool::metrics::render_table;
use lowprofool::Result;

#[derive(Parser)]
#[command(
    name = "lowprofool",
    version,
    about = "Imperceptible adversarial attacks on tabular classifiers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic two-class dataset with schema and run config.
    Synth(SynthArgs),
    /// Train the victim model and save it with the importance weights.
    Train(TrainArgs),
    /// Attack the test split with the configured parameters, no tuning.
    Attack(CampaignArgs),
    /// Recompute the report tables from a run directory's artifacts.
    Evaluate(EvaluateArgs),
    /// Full pipeline: train, tune on validation, attack, report.
    Run(CampaignArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum MethodArg {
    Lowprofool,
    Deepfool,
    Fgsm,
    All,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            MethodArg::Lowprofool => vec![Method::LowProFool],
            MethodArg::Deepfool => vec![Method::DeepFool],
            MethodArg::Fgsm => vec![Method::Fgsm],
            MethodArg::All => Method::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum NormArg {
    UnitL2,
    AsPrinted,
}

impl From<NormArg> for ImportanceNorm {
    fn from(arg: NormArg) -> ImportanceNorm {
        match arg {
            NormArg::UnitL2 => ImportanceNorm::UnitL2,
            NormArg::AsPrinted => ImportanceNorm::AsPrinted,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum ClipArg {
    PerStep,
    None,
}

impl From<ClipArg> for ClipMode {
    fn from(arg: ClipArg) -> ClipMode {
        match arg {
            ClipArg::PerStep => ClipMode::PerStep,
            ClipArg::None => ClipMode::None,
        }
    }
}

/// Config overrides shared by the pipeline subcommands.
#[derive(Args, Debug)]
struct OverrideArgs {
    /// Root seed; replaces the config's seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Trade-off factor of the importance-weighted attack.
    #[arg(long)]
    lambda: Option<f64>,
    /// Gradient step scale.
    #[arg(long)]
    alpha: Option<f64>,
    /// Iteration budget.
    #[arg(long)]
    iters: Option<usize>,
    /// Single-step attack magnitude.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Importance weight normalization.
    #[arg(long, value_enum)]
    importance_norm: Option<NormArg>,
    /// Bounds projection applied to iterates.
    #[arg(long, value_enum)]
    clip: Option<ClipArg>,
}

impl OverrideArgs {
    /// Returns true when lambda or alpha came from the command line;
    /// validation tuning would silently discard those, so the caller
    /// disables it.
    fn apply(&self, config: &mut ExperimentConfig) -> bool {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(lambda) = self.lambda {
            config.attack.lambda = lambda;
        }
        if let Some(alpha) = self.alpha {
            config.attack.alpha = alpha;
        }
        if let Some(iters) = self.iters {
            config.attack.max_iter = iters;
        }
        if let Some(epsilon) = self.epsilon {
            config.attack.fgsm_epsilon = epsilon;
        }
        if let Some(norm) = self.importance_norm {
            config.importance_norm = norm.into();
        }
        if let Some(clip) = self.clip {
            config.attack.clip_mode = clip.into();
        }
        self.lambda.is_some() || self.alpha.is_some()
    }
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Directory receiving synthetic.csv, schema.json and config.json.
    #[arg(long)]
    out: PathBuf,
    /// Root seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of rows.
    #[arg(long, default_value_t = 1000)]
    n: usize,
    /// Per-feature class separations, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [3.0, 0.8])]
    separations: Vec<f64>,
    /// Per-feature noise scales, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [1.0, 1.0])]
    noise: Vec<f64>,
    /// Dataset name used in reports.
    #[arg(long, default_value = "synthetic")]
    name: String,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving model.json, importance.csv and the config
    /// snapshot.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args, Debug)]
struct CampaignArgs {
    /// Experiment config JSON.
    #[arg(long)]
    config: PathBuf,
    /// Artifact directory; omit to print the report without writing files.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Attack methods to run.
    #[arg(long, value_enum, default_value = "all")]
    method: MethodArg,
    #[command(flatten)]
    overrides: OverrideArgs,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Run directory holding config.json, model.json and outcome files.
    #[arg(long)]
    out: PathBuf,
}

fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        separations: args.separations.clone(),
        noise: args.noise.clone(),
    };
    let dataset = generate_synthetic(&spec, args.n, derive_seed(args.seed, streams::SYNTH))?;
    std::fs::create_dir_all(&args.out)?;

    let data_path = args.out.join("synthetic.csv");
    dataset.save_csv(&data_path)?;

    // all columns are continuous, so only the target needs naming
    let schema_path = args.out.join("schema.json");
    let schema = serde_json::json!({ "target": "label", "columns": {} });
    std::fs::write(&schema_path, serde_json::to_string_pretty(&schema)?)?;

    let config = ExperimentConfig {
        name: args.name.clone(),
        source: DataSource::Csv {
            data: data_path.clone(),
            schema: schema_path,
        },
        model: Default::default(),
        attack: Default::default(),
        tuning: Some(Default::default()),
        importance_norm: Default::default(),
        seed: args.seed,
    };
    let config_path = args.out.join("config.json");
    std::fs::write(&config_path, serde_json::to_string_pretty(&config)?)?;

    println!(
        "wrote {} rows x {} features to {}",
        dataset.n_rows(),
        dataset.n_features(),
        data_path.display()
    );
    println!("config: {}", config_path.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Result<()> {
    let mut config = ExperimentConfig::from_json_file(&args.config)?;
    args.overrides.apply(&mut config);

    let dataset = load_source(&config)?;
    let parts = split_source(&dataset, &config)?;
    let v = importance_vector(&parts.train, config.importance_norm)?;
    let (mlp, report) = train_victim(&parts, &config)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(
        args.out.join("config.json"),
        serde_json::to_string_pretty(&config)?,
    )?;
    mlp.save(&args.out.join("model.json"))?;
    let names: Vec<String> = parts
        .train
        .features
        .iter()
        .map(|f| f.name.clone())
        .collect();
    v.save_csv(&args.out.join("importance.csv"), &names)?;

    println!(
        "trained on {} rows: loss {:.4} -> {:.4}, train accuracy {:.3}",
        parts.train.n_rows(),
        report.initial_loss,
        report.final_loss,
        report.final_accuracy
    );
    println!("test accuracy {:.3}", mlp.accuracy(&parts.test)?);
    Ok(())
}

fn cmd_campaign(args: &CampaignArgs, tune: bool) -> Result<()> {
    let mut config = ExperimentConfig::from_json_file(&args.config)?;
    let explicit_params = args.overrides.apply(&mut config);
    if !tune || explicit_params {
        config.tuning = None;
    }

    let result = run_experiment_with_methods(&config, args.out.as_deref(), &args.method.methods())?;

    if tune {
        println!(
            "params: lambda {}, alpha {}, iters {}",
            result.params.lambda, result.params.alpha, result.params.max_iter
        );
    }
    print!("{}", render_table(&result.reports));
    if let Some(out) = &args.out {
        println!("artifacts: {}", out.display());
    }
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let reports = evaluate_artifacts(&args.out)?;
    print!("{}", render_table(&reports));
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Synth(args) => cmd_synth(args),
        Command::Train(args) => cmd_train(args),
        Command::Attack(args) => cmd_campaign(args, false),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Run(args) => cmd_campaign(args, true),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
