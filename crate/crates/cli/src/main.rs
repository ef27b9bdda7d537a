//! `tkm`: run Tikhonov-Mann iterations, tabulate their rates of asymptotic
//! regularity and check those rates against the recorded orbits.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tkm_core::Sigma5Argument;

use commands::{Overrides, Settings};
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "tkm", version, about = "Tikhonov-Mann iteration rates and their empirical validation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the iteration and write the per-step trace.
    Run(Common),
    /// Print the table of rates for k = 0..=kmax.
    Rates(Common),
    /// Check moduli, axioms, orbit inequalities and rates; exit 1 on failure.
    Validate {
        #[command(flatten)]
        common: Common,
        /// Set beta at this index to 0 before running (engineered failure).
        #[arg(long, value_name = "INDEX")]
        sabotage: Option<usize>,
        /// Check rate bounds at every index instead of a strided sample.
        #[arg(long)]
        full_density: bool,
    },
    /// Compare composed rate pipelines with the closed forms.
    Compare(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// TOML scenario file.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Built-in scenario used when no config is given.
    #[arg(long, value_name = "NAME", conflicts_with = "config")]
    scenario: Option<String>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long = "kmax")]
    k_max: Option<u64>,
    #[arg(long)]
    slack: Option<f64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use σ₅(4K(k+1)-1) instead of σ₅(4KΛ(k+1)-1) in the T-rate.
    #[arg(long)]
    statement_literal_sigma5: bool,
    /// Directory for output files.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

impl Common {
    fn settings(&self) -> Result<Settings, CliError> {
        let o = Overrides { horizon: self.horizon, k_max: self.k_max, slack: self.slack, stride: self.stride, seed: self.seed };
        let loaded = commands::load(self.config.as_deref(), self.scenario.as_deref(), &o)?;
        let variant = if self.statement_literal_sigma5 { Sigma5Argument::Literal } else { Sigma5Argument::Sound };
        Ok(Settings { loaded, variant, out: self.out.clone() })
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(c) => print!("{}", commands::run(&c.settings()?)?),
        Command::Rates(c) => print!("{}", commands::rates(&c.settings()?)?),
        Command::Validate { common, sabotage, full_density } => {
            let mut s = common.settings()?;
            if let Some(i) = sabotage {
                let sc = &mut s.loaded.scenario;
                sc.beta = sc.beta.clone().patched(i, 0.0)?;
            }
            let (text, passed) = commands::validate(&s, full_density)?;
            print!("{text}");
            if !passed {
                let first = text.lines().find(|l| l.starts_with("FAIL")).unwrap_or("").to_string();
                return Err(CliError::Validation(first));
            }
        }
        Command::Compare(c) => {
            let (text, passed) = commands::compare(&c.settings()?)?;
            print!("{text}");
            if !passed {
                return Err(CliError::Validation("closed form and pipeline disagree".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tkm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
