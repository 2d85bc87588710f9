//! Command-line front end for the fraud-detection pipeline.
//!
//! Stages share a run directory named after the configuration hash, so they
//! can be executed one at a time or all at once (`compare`) with identical
//! results. Exit codes: 0 success, 1 usage error, 2 stage failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svddkit::dataio;
use svddkit::error::{Error, Result};
use svddkit::pipeline::{self, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "svddkit",
    version,
    about = "One-class fraud detection: hypersphere training on reduced samples vs an SVM baseline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load or generate the input, normalize it and write the train/test partitions
    Ingest(StageArgs),
    /// Write a synthetic two-class dataset to a CSV file
    Generate(GenerateArgs),
    /// Shrink the one-class training table with density-based selection
    Reduce(StageArgs),
    /// Resolve hyperparameters (GA or fixed) and write params.toml
    Tune(StageArgs),
    /// Train the one-class and two-class models from params.toml
    Train(StageArgs),
    /// Score trained models on the test partition and write metric/ROC files
    Evaluate(EvaluateArgs),
    /// Run the whole pipeline plus the equal-training-budget comparison
    Compare(StageArgs),
}

#[derive(Args)]
struct StageArgs {
    /// Pipeline configuration file (TOML)
    #[arg(long)]
    config: PathBuf,
    /// Master seed override
    #[arg(long)]
    seed: Option<u64>,
    /// Output root override; artifacts land in <out>/run-<config-hash>
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    stage: StageArgs,
    /// Model files (inside the run directory) to score; defaults to
    /// svdd.model and svm.model
    #[arg(long = "model")]
    models: Vec<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// rings | moons | gaussians | fraud
    #[arg(long)]
    shape: String,
    /// Points per class (rings, moons, gaussians)
    #[arg(long)]
    n_per_class: Option<usize>,
    /// Total rows (fraud)
    #[arg(long)]
    n_rows: Option<usize>,
    /// Fraction of fraud rows (fraud; default 0.01)
    #[arg(long)]
    fraud_fraction: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    noise: f64,
    /// Master seed; the generator stream is derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn load_config(args: &StageArgs) -> Result<PipelineConfig> {
    let mut config = PipelineConfig::from_file(&args.config)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output.dir = out.clone();
    }
    Ok(config)
}

fn prepare_dir(config: &PipelineConfig) -> Result<PathBuf> {
    let dir = config.run_dir();
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn run_stage(args: &StageArgs, name: &'static str) -> Result<()> {
    let config = load_config(args)?;
    let dir = prepare_dir(&config)?;
    match name {
        "ingest" => pipeline::stage_ingest(&config, &dir).map_err(|e| e.in_stage("ingest"))?,
        "reduce" => {
            let result =
                pipeline::stage_reduce(&config, &dir).map_err(|e| e.in_stage("reduce"))?;
            println!(
                "reduced {} rows to {} (eps {:.6})",
                result.provenance.len(),
                result.selected.n_rows(),
                result.eps_used
            );
        }
        "tune" => {
            let params = pipeline::stage_tune(&config, &dir).map_err(|e| e.in_stage("tune"))?;
            println!(
                "svdd: sigma {:.6} fracrej {:.6}; svm: sigma {:.6} box_c {:.6}",
                params.svdd.sigma, params.svdd.fracrej, params.svm.sigma, params.svm.box_c
            );
        }
        "train" => {
            pipeline::stage_train_svdd(&config, &dir).map_err(|e| e.in_stage("train-svdd"))?;
            pipeline::stage_train_svm(&config, &dir).map_err(|e| e.in_stage("train-svm"))?;
        }
        _ => unreachable!(),
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = load_config(&args.stage)?;
    let dir = prepare_dir(&config)?;
    let defaults = vec!["svdd.model".to_string(), "svm.model".to_string()];
    let models = if args.models.is_empty() {
        defaults
    } else {
        args.models.clone()
    };
    let refs: Vec<&str> = models.iter().map(String::as_str).collect();
    let evaluated = pipeline::stage_evaluate(&config, &dir, &refs)
        .map_err(|e| e.in_stage("evaluate"))?;
    for (name, metrics) in &evaluated {
        println!("{}", metrics.to_table(name));
    }
    println!("artifacts in {}", dir.display());
    Ok(())
}

fn run_compare(args: &StageArgs) -> Result<()> {
    let config = load_config(args)?;
    let outcome = pipeline::run_equal_budget_comparison(&config)?;
    println!("{}", outcome.svdd_metrics.to_table("svdd (reduced training set)"));
    if let Some(m) = &outcome.svdd_unreduced_metrics {
        println!("{}", m.to_table("svdd (unreduced training set)"));
    }
    println!("{}", outcome.svm_metrics.to_table("svm (full training partition)"));
    if let Some(m) = &outcome.svm_equal_metrics {
        println!(
            "{}",
            m.to_table(&format!("svm (equal budget, {} rows)", outcome.reduced_rows))
        );
    }
    println!("timings:");
    for (phase, secs) in outcome.timing.entries() {
        println!("  {:<22} {:>10.3}s", phase, secs);
    }
    println!("artifacts in {}", outcome.run_dir.display());
    Ok(())
}

fn run_generate(args: &GenerateArgs) -> Result<()> {
    let seed = pipeline::stage_seed(args.seed, "generate");
    let data = if args.shape.eq_ignore_ascii_case("fraud") {
        let n_rows = args
            .n_rows
            .ok_or_else(|| Error::InvalidConfig("--n-rows is required for fraud".into()))?;
        dataio::generate_fraud_like(
            n_rows,
            args.fraud_fraction.unwrap_or(0.01),
            args.noise,
            seed,
        )?
    } else {
        let shape: dataio::ShapeKind = args.shape.parse()?;
        let n = args.n_per_class.ok_or_else(|| {
            Error::InvalidConfig("--n-per-class is required for this shape".into())
        })?;
        dataio::generate_two_class_shapes(n, shape, args.noise, seed)?
    };
    dataio::write_table(&data, &args.out, b',')?;
    println!(
        "wrote {} rows ({} fraud) to {}",
        data.n_rows(),
        data.count_label(1),
        args.out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let result = match &cli.command {
        Command::Ingest(args) => run_stage(args, "ingest"),
        Command::Generate(args) => run_generate(args),
        Command::Reduce(args) => run_stage(args, "reduce"),
        Command::Tune(args) => run_stage(args, "tune"),
        Command::Train(args) => run_stage(args, "train"),
        Command::Evaluate(args) => run_evaluate(args),
        Command::Compare(args) => run_compare(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ (Error::ConfigFormat(_) | Error::InvalidConfig(_))) => {
            eprintln!("error: {}", e);
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {}", e);
            ExitCode::from(2)
        }
    }
}
