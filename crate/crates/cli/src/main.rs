use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

/// Sentence generation under label constraints: Gibbs sampling with
/// beam-search and reject-sampling baselines.
#[derive(Parser, Debug)]
#[command(name = "gibbsgen", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the language models and discriminators into a models directory.
    Train(TrainArgs),
    /// Generate sentences with one of the three methods.
    Generate(GenerateArgs),
    /// Score a generated-sentence file against a reference corpus.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Constraint schema, one `dimension: class,class` per line.
    #[arg(long)]
    pub schema: PathBuf,
    /// Labeled corpus: one class per dimension, then the sentence, TAB-separated.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Output models directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 3)]
    pub order: usize,
    /// Words seen fewer times become UNK.
    #[arg(long, default_value_t = 10)]
    pub min_count: usize,
    /// Naive Bayes add-alpha smoothing.
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
    /// Fraction of each label group held out for the report.
    #[arg(long, default_value_t = 0.1)]
    pub holdout: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum MethodArg {
    Gibbs,
    Beam,
    Reject,
}

#[derive(Args, Debug)]
pub struct GenerateArgs {
    #[arg(long)]
    pub models: PathBuf,
    #[arg(long, value_enum, default_value = "gibbs")]
    pub method: MethodArg,
    /// `dim=class[,dim=class]`; without it, labels cycle through every combination.
    #[arg(long)]
    pub labels: Option<String>,
    /// `key = value` settings file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub turns: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub candidates: Option<usize>,
    /// `sequential` or `random`.
    #[arg(long)]
    pub scan: Option<String>,
    #[arg(long)]
    pub beam_size: Option<usize>,
    #[arg(long)]
    pub rs_samples: Option<usize>,
    /// Reject sampling draws from the `top_w` most likely next words.
    #[arg(long)]
    pub top_w: Option<usize>,
    /// Length cap for beam search and reject sampling.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long, default_value_t = 80)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write every Gibbs snapshot to this file.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub models: PathBuf,
    /// File written by `generate`.
    #[arg(long)]
    pub generated: PathBuf,
    /// Reference corpus, same format as for training.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Snapshot trace written by `generate --trace`.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long, default_value_t = 0.6)]
    pub threshold: f64,
    /// Directory for the summary, curve and histogram files.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Also score randomly drawn corpus sentences as a reference point.
    #[arg(long)]
    pub random_baseline: bool,
    #[arg(long, default_value_t = 20)]
    pub bins: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => commands::train(&args),
        Command::Generate(args) => commands::generate(&args),
        Command::Eval(args) => commands::eval(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
