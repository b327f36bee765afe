use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dqvi_cli::{cmd_convergence, cmd_run, cmd_validate, CliError, Overrides};

#[derive(Parser)]
#[command(name = "dqvi", version, about = "Time stepping for coupled evolution/quasivariational/parabolic inequality systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overriding the run file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the hypothesis sampler.
    #[arg(long)]
    seed: Option<u64>,
    /// Step even when the contraction margins are violated.
    #[arg(long)]
    override_margin: bool,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides { out: self.out.clone(), seed: self.seed, override_margin: self.override_margin }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured problem.
    Run(Common),
    /// Run at successively halved time steps and tabulate differences.
    Convergence {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Audit the declared constants and report the margins.
    Validate(Common),
}

fn execute(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Run(c) => cmd_run(&c.config, &c.overrides()).map(|r| r.exit_code),
        Command::Convergence { common, levels } => cmd_convergence(&common.config, levels, &common.overrides()).map(|r| r.exit_code),
        Command::Validate(c) => cmd_validate(&c.config, &c.overrides()).map(|r| {
            print!("{}", r.text);
            r.exit_code
        }),
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
