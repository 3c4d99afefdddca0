use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dave_core::config::{parse_pairs, ExperimentConfig};
use dave_core::data::write_libsvm;
use dave_core::experiment::run_experiment;
use dave_core::synth::{logistic_dataset, LogisticParams};

#[derive(Parser)]
#[command(
    name = "dave",
    version,
    about = "Asynchronous distributed proximal gradient experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a config file, with flag overrides
    Run(RunArgs),
    /// Write a synthetic binary classification dataset in LIBSVM format
    GenData(GenArgs),
}

#[derive(Args)]
struct RunArgs {
    /// key = value config file
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// simulate | run
    #[arg(long)]
    mode: Option<String>,
    /// Comma-separated: dave-rpg, piag, sync-pg
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Comma-separated counts, or budget:<time>
    #[arg(long)]
    reps: Option<String>,
    /// constant:<t> | uniform:<a>:<b> | exponential:<mean> | slow:<worker>:<factor>[:<base>]
    #[arg(long)]
    delay_model: Option<String>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    budget_iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any other config key, as key=value
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 1000)]
    examples: usize,
    #[arg(long, default_value_t = 100)]
    features: usize,
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 0.3)]
    support: f64,
    #[arg(long, default_value_t = 0.1)]
    label_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

fn run(args: RunArgs) -> Result<()> {
    let mut pairs = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    let mut push = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    push("mode", args.mode);
    push("algo", args.algo);
    push("workers", args.workers.map(|v| v.to_string()));
    push("reps", args.reps);
    push("delay-model", args.delay_model);
    push("lambda1", args.lambda1.map(|v| v.to_string()));
    push("lambda2", args.lambda2.map(|v| v.to_string()));
    push("seed", args.seed.map(|v| v.to_string()));
    push("budget-iters", args.budget_iters.map(|v| v.to_string()));
    push("out", args.out.map(|v| v.display().to_string()));
    for kv in &args.set {
        let Some((k, v)) = kv.split_once('=') else {
            bail!("--set expects KEY=VALUE, got {kv:?}");
        };
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    let cfg = ExperimentConfig::from_pairs(&pairs)?;
    for run in run_experiment(&cfg)? {
        println!(
            "{}: {} iterations -> {} (problem {})",
            run.label,
            run.iterations,
            run.dir.display(),
            &run.problem_sha256[..16]
        );
    }
    Ok(())
}

fn gen_data(args: GenArgs) -> Result<()> {
    let params = LogisticParams {
        examples: args.examples,
        features: args.features,
        density: args.density,
        support: args.support,
        label_noise: args.label_noise,
        ..LogisticParams::default()
    };
    let data = logistic_dataset(&params, args.seed)?;
    let file =
        File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_libsvm(&data, BufWriter::new(file))?;
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(a) => run(a),
        Command::GenData(a) => gen_data(a),
    }
}
