use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wpsle_cli::{run, CliError, Command, Invocation};

#[derive(Parser)]
#[command(
    name = "wpsle",
    about = "Integral means spectrum toolkit for whole-plane SLE: exact exponents, \
             boundary ODE profiles, PDE scans, and Monte Carlo estimates"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Config file (key=value with [section] headers)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; all files are written under it
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Override the master seed from the config
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Resume from a moments checkpoint (config hash must match)
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
    /// Worker thread count (default: WPSLE_THREADS or all cores); never
    /// affects results
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Tabulate every exponent of the set over a (kappa, t) grid
    Exponents,
    /// Tabulate both spectrum variants, branches, and transition orders
    SpectrumTable,
    /// Profile the boundary ODE solution g0 and its residuals over u
    G0Profile,
    /// Check the closed-form action against finite differences
    PdeVerify,
    /// Scan the sign of the mixed trial function's action on an annulus
    SubsolutionScan,
    /// Estimate derivative moments by Monte Carlo, with checkpointing
    Simulate,
    /// Fit spectrum slopes from the moment estimates
    Fit,
    /// Compare fitted slopes against the closed-form spectrum
    Compare,
}

impl From<Sub> for Command {
    fn from(s: Sub) -> Command {
        match s {
            Sub::Exponents => Command::Exponents,
            Sub::SpectrumTable => Command::SpectrumTable,
            Sub::G0Profile => Command::G0Profile,
            Sub::PdeVerify => Command::PdeVerify,
            Sub::SubsolutionScan => Command::SubsolutionScan,
            Sub::Simulate => Command::Simulate,
            Sub::Fit => Command::Fit,
            Sub::Compare => Command::Compare,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let threads = cli.threads.or_else(|| {
        std::env::var("WPSLE_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("{}", CliError::Config(format!("thread pool: {e}")));
            return ExitCode::from(2);
        }
    }

    let Some(config_path) = cli.config else {
        eprintln!("{}", CliError::Config("missing --config PATH".into()));
        return ExitCode::from(2);
    };
    let inv = Invocation {
        command: cli.command.into(),
        config_path,
        out_dir: cli.out,
        seed: cli.seed,
        resume: cli.resume,
    };
    match run(&inv) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
