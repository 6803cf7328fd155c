//! `driftcheck` command-line front end.

mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use driftcheck_core::claims::DEFAULT_TEMPLATE;
use driftcheck_core::critic::{DEFAULT_TAUTOLOGY, DEFAULT_TIMEOUT_MS};
use driftcheck_core::diffusion::{DEFAULT_STEPS, DEFAULT_TIMESTEPS, DEFAULT_T_STAR};
use driftcheck_core::embedder::DEFAULT_DIM;
use driftcheck_core::energy::DEFAULT_LAMBDA;

/// Environment variable holding the default external critic command.
pub const CRITIC_CMD_ENV: &str = "DRIFTCHECK_CRITIC_CMD";

#[derive(Parser, Debug)]
#[command(name = "driftcheck", version, about = "Diffusion stress tests for factual claims")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic world: corpus.jsonl and test.jsonl.
    GenWorld(GenWorldArgs),
    /// Embed a corpus once and save the matrix (.csv or binary).
    BuildManifold(BuildManifoldArgs),
    /// Stress-test every claim of a test set and write per-claim results.
    StressTest(StressArgs),
    /// Compare all scoring methods over one or more seeds.
    Evaluate(EvaluateArgs),
    /// Hybrid AUROC as a function of the focal timestep.
    SweepTstar(SweepTstarArgs),
    /// Hybrid AUROC as a function of lambda, from stored results.
    SweepLambda(SweepLambdaArgs),
    /// Run ablation variants.
    Ablate(AblateArgs),
}

#[derive(Args, Debug)]
struct GenWorldArgs {
    #[arg(long, default_value_t = 50)]
    entities: usize,
    #[arg(long, default_value_t = 5)]
    relations: usize,
    #[arg(long, default_value_t = 4)]
    objects: usize,
    /// Share of true triples that go into the corpus.
    #[arg(long, default_value_t = 0.8)]
    fraction: f64,
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct BuildManifoldArgs {
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    /// `.csv` for text, anything else for the binary format.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct DataArgs {
    /// Truth corpus (JSONL claims).
    #[arg(long)]
    corpus: PathBuf,
    /// Claims to score (JSONL, FEVER-style labels).
    #[arg(long)]
    test: PathBuf,
    /// Precomputed corpus matrix; must match --corpus row for row.
    #[arg(long)]
    manifold: Option<PathBuf>,
    /// Keep at most this many claims per label from --test.
    #[arg(long)]
    max_per_label: Option<usize>,
    #[arg(long, default_value_t = 0)]
    sample_seed: u64,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ScheduleArg {
    Sqrt,
    Linear,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum CriticArg {
    Schema,
    External,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DirectionArg {
    ClaimAsPremise,
    ClaimAsHypothesis,
}

#[derive(Args, Debug)]
struct EngineArgs {
    #[arg(long, default_value_t = DEFAULT_T_STAR)]
    t_star: usize,
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    steps: usize,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Sqrt)]
    schedule: ScheduleArg,
    #[arg(long, default_value_t = DEFAULT_TIMESTEPS)]
    timesteps: usize,
    #[arg(long, default_value_t = DEFAULT_DIM)]
    dim: usize,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Scale applied to unit embeddings before noising [default: sqrt(dim)].
    #[arg(long)]
    signal_scale: Option<f64>,
    /// Reconstructions per claim; energies are averaged.
    #[arg(long, default_value_t = 1)]
    repeats: usize,
    /// Jump straight from t* to the posterior mean.
    #[arg(long)]
    single_shot: bool,
    /// Drop the reverse-step noise.
    #[arg(long)]
    deterministic_reverse: bool,
    #[arg(long, value_enum, default_value_t = CriticArg::Schema)]
    critic: CriticArg,
    /// External critic command line [env: DRIFTCHECK_CRITIC_CMD].
    #[arg(long)]
    critic_cmd: Option<String>,
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Claim template the schema critic parses with.
    #[arg(long, default_value = DEFAULT_TEMPLATE)]
    template: String,
    #[arg(long, default_value = DEFAULT_TAUTOLOGY)]
    tautology: String,
    #[arg(long, value_enum, default_value_t = DirectionArg::ClaimAsPremise)]
    tautology_direction: DirectionArg,
    /// Worker threads [default: available cores]. Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct VerifyArg {
    /// Run twice and fail unless the outputs are identical.
    #[arg(long)]
    verify: bool,
}

#[derive(Args, Debug)]
struct StressArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `.csv` writes scalar columns only; otherwise JSONL.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// `oracle` for the best cut, or a number for a fixed cut.
    #[arg(long, default_value = "oracle")]
    threshold: String,
    /// Also run the default t* and lambda sweeps into the report.
    #[arg(long)]
    with_sweeps: bool,
    /// Report JSON.
    #[arg(long)]
    out: PathBuf,
    /// Optional per-method summary CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct SweepTstarArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "100,250,500,750,900")]
    values: Vec<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Optional whitespace-separated data file for plotting.
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct SweepLambdaArgs {
    /// Results JSONL written by stress-test.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
    values: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    plot: Option<PathBuf>,
    #[command(flatten)]
    verify: VerifyArg,
}

#[derive(Args, Debug)]
struct AblateArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    engine: EngineArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated: hybrid, mse_only, disc_only, fixed_t_star_N.
    #[arg(long, value_delimiter = ',')]
    variants: Vec<String>,
    #[arg(long, default_value = "oracle")]
    threshold: String,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    verify: VerifyArg,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run::run(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(run::Failure::Usage(msg)) => {
            eprintln!("driftcheck: {msg}");
            ExitCode::from(1)
        }
        Err(run::Failure::Runtime(msg)) => {
            eprintln!("driftcheck: {msg}");
            ExitCode::from(2)
        }
    }
}
