use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coag::commands::{self, Options, Outcome};

#[derive(Parser)]
#[command(name = "coag", version, about = "Sectional solver for the generalized coagulation family")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and check the a-priori bounds along it.
    Simulate(Common),
    /// ε- and n-sweeps against the transport-limit reference.
    Sweep(Common),
    /// Certify the kernel's growth and derivative constants by sampling.
    CheckKernel(Common),
    /// Analytic and conservation checks.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl From<Common> for Options {
    fn from(c: Common) -> Self {
        Options {
            config: c.config,
            out: c.out,
            threads: c.threads,
            seed: c.seed,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(c) => commands::simulate(&c.into()),
        Command::Sweep(c) => commands::sweep(&c.into()),
        Command::CheckKernel(c) => commands::check_kernel(&c.into()),
        Command::Validate(c) => commands::validate(&c.into()),
    };
    match result {
        Ok(outcome) => {
            if outcome == Outcome::BoundFailure {
                eprintln!("bound check failed; see the report in the output directory");
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
