use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser, Debug)]
#[command(name = "atnmf", version, about = "Adversarially-trained NMF for matrix completion")]
struct Cli {
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic low-rank matrix V = WH.
    Synth(SynthArgs),
    /// Factorize one dataset and write W, H, R and the loss trace.
    Solve(SolveArgs),
    /// Run an experiment grid described by a config file.
    Experiment(ExperimentArgs),
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, default_value_t = 100)]
    f: usize,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// Inverse-Gamma shape of the component precisions.
    #[arg(long, default_value_t = 50.0)]
    a: f64,
    /// Inverse-Gamma scale of the component precisions.
    #[arg(long, default_value_t = 70.0)]
    b: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file for V (dense text format).
    #[arg(long)]
    out: PathBuf,
    /// Also write the ground-truth W and H into this directory.
    #[arg(long)]
    truth_dir: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    Dense,
    ImageGrid,
    Hyperspectral,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum NormalizationArg {
    None,
    Cbcl,
    UnitScale,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum MethodArg {
    Nmf,
    Atnmf,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Data file (dense text format, or raw cube for --kind hyperspectral).
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "dense")]
    kind: KindArg,
    #[arg(long, value_enum, default_value = "none")]
    normalization: NormalizationArg,
    #[arg(long)]
    bands: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    #[arg(long, value_enum, default_value = "atnmf")]
    method: MethodArg,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.01)]
    eps_in: f64,
    #[arg(long, default_value_t = 0.01)]
    eps_out: f64,
    #[arg(long, default_value_t = 1000)]
    max_inner: usize,
    #[arg(long, default_value_t = 100)]
    max_outer: usize,
    /// Hold out this fraction of entries and report the RMSE on them.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ExperimentArgs {
    /// Config file (`key = value` lines).
    config: PathBuf,
    /// Override the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    alphas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    #[arg(long, value_delimiter = ',')]
    lambdas: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    eps_in: Option<f64>,
    #[arg(long)]
    eps_out: Option<f64>,
    #[arg(long)]
    max_inner: Option<usize>,
    #[arg(long)]
    max_outer: Option<usize>,
}

fn init_threads() {
    let Ok(raw) = std::env::var("ATNMF_THREADS") else {
        return;
    };
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                log::warn!("ATNMF_THREADS ignored: {e}");
            }
        }
        _ => log::warn!("ATNMF_THREADS={raw:?} is not a positive integer; ignored"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    init_threads();

    let result = match cli.command {
        Command::Synth(args) => commands::synth(args),
        Command::Solve(args) => commands::solve(args),
        Command::Experiment(args) => commands::experiment(args, cli.verbose),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
