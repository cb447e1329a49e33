use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subdiff_core::harness::{self, ExperimentConfig, Table};
use subdiff_core::Error;

#[derive(Parser)]
#[command(name = "subdiff", version, about = "Corrected convolution-quadrature experiments for time-fractional subdiffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML experiment config; defaults apply to missing keys
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output file (stdout when omitted)
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,

    /// Worker threads for independent runs
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Command {
    /// Convolution weights and b, c coefficients of the configured family
    Weights,
    /// Summability and positivity checks over the family/alpha/theta grid
    CheckAssumptions,
    /// Condition numbers of the starting-weight systems
    CondReport,
    /// Error table over the configured step sizes and correction counts
    Converge,
    /// Direct against fast history on one run
    FastCompare,
    /// History time and memory, direct against fast, scalar problem
    Bench,
    /// Mittag-Leffler values E_alpha(-x)
    Ml,
    /// Solution fields at the configured times
    Snapshot,
}

enum Failure {
    Config(String),
    Solver(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::SolverFailure { .. } | Error::ExpSumAccuracy { .. } | Error::IllConditioned { .. } => {
                Failure::Solver(e.to_string())
            }
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::Config(format!("--threads: {e}")))?;
    }
    let cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let table: Table = match cli.command {
        Command::Weights => harness::weights_table(&cfg)?,
        Command::CheckAssumptions => harness::assumption_table(&cfg)?,
        Command::CondReport => harness::cond_table(&cfg)?,
        Command::Converge => harness::convergence_study(&cfg)?.table(),
        Command::FastCompare => harness::fast_compare_table(&cfg)?,
        Command::Bench => harness::bench_table(&cfg)?,
        Command::Ml => harness::ml_table(&cfg)?,
        Command::Snapshot => harness::snapshot_table(&cfg)?,
    };
    let text = match cli.format {
        Format::Csv => table.to_csv(),
        Format::Json => table.to_json(),
    };
    match &cli.out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(3)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
