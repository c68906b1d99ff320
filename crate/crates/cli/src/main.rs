//! `driftctl`: solve, compare, simulate and sweep promotion-control instances.
//!
//! Exit codes: 0 success, 1 input error, 2 numeric failure.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod instance;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use instance::SweepParam;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad file, flag or instance. Exit code 1.
    #[error("{0}")]
    Input(String),
    /// The solver or simulator failed on a valid instance. Exit code 2.
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Numeric(_) => 2,
        }
    }
}

impl From<driftctl::Error> for CliError {
    fn from(e: driftctl::Error) -> Self {
        use driftctl::Error as E;
        match e {
            E::Validation(_) | E::Domain { .. } | E::Config(_) => CliError::Input(e.to_string()),
            E::Unbounded { .. }
            | E::BlowUp { .. }
            | E::Inconclusive { .. }
            | E::Bracket { .. }
            | E::IllConditioned { .. } => {
                CliError::Numeric(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "driftctl", version, about = "Optimal promotion policies for a drift-controlled reflected diffusion")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute beta*, the thresholds and the value function.
    ///
    /// Writes JSON to --out and a (z, v, f, theta_star) grid next to it with
    /// extension .csv.
    Solve {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        beta_tol: Option<f64>,
    },
    /// Static benchmark costs against beta*, as CSV.
    Compare {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Mixture weights over theta_0..theta_K, comma separated. Repeatable.
        #[arg(long = "mix", value_name = "WEIGHTS")]
        mix: Vec<String>,
        #[arg(long)]
        beta_tol: Option<f64>,
    },
    /// Monte Carlo estimate of a policy's long-run average cost.
    Simulate {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// dynamic, static:<theta> or mix:<w_0,...,w_K>
        #[arg(long, allow_hyphen_values = true)]
        policy: String,
        /// Also write the first replication's path to <out>.trace.csv.
        #[arg(long)]
        trace: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        beta_tol: Option<f64>,
    },
    /// Solve over a list or range of one parameter.
    Sweep {
        #[arg(long)]
        instance: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        param: SweepParam,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true, conflicts_with = "range")]
        values: Option<String>,
        /// start:stop:count, both ends included.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        #[arg(long)]
        beta_tol: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { instance, out, beta_tol } => commands::cmd_solve(&instance, &out, beta_tol),
        Command::Compare {
            instance,
            out,
            mix,
            beta_tol,
        } => commands::cmd_compare(&instance, &out, &mix, beta_tol),
        Command::Simulate {
            instance,
            out,
            policy,
            trace,
            seed,
            beta_tol,
        } => commands::cmd_simulate(&instance, &out, &policy, trace, seed, beta_tol),
        Command::Sweep {
            instance,
            out,
            param,
            values,
            range,
            beta_tol,
        } => commands::cmd_sweep(&instance, &out, param, values.as_deref(), range.as_deref(), beta_tol),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
