mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use crp_core::CrpError;

/// Exact and asymptotic local probabilities for arithmetic compound renewal
/// processes.
#[derive(Debug, Parser)]
#[command(name = "crp", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Model file (JSON).
    #[arg(short = 'm', long, global = true)]
    pub model: Option<PathBuf>,

    /// Output CSV path; stdout when omitted.
    #[arg(short = 'o', long, global = true)]
    pub out: Option<PathBuf>,

    #[arg(long, global = true)]
    pub n: Option<u64>,

    /// Comma-separated, strictly increasing.
    #[arg(long = "n-list", global = true, value_delimiter = ',')]
    pub n_list: Option<Vec<u64>>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    pub x: Option<i64>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    pub alpha: Option<f64>,

    #[arg(long = "alpha-min", global = true, allow_hyphen_values = true)]
    pub alpha_min: Option<f64>,

    #[arg(long = "alpha-max", global = true, allow_hyphen_values = true)]
    pub alpha_max: Option<f64>,

    #[arg(long = "alpha-steps", global = true)]
    pub alpha_steps: Option<usize>,

    #[arg(long, global = true)]
    pub theta: Option<f64>,

    #[arg(long, global = true)]
    pub paths: Option<u64>,

    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Simulate under the exponential tilt at `--alpha`.
    #[arg(long, global = true)]
    pub tilted: bool,

    /// Skip the arithmetic condition gate.
    #[arg(long = "unsafe", global = true)]
    pub unsafe_mode: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Check condition [Z] and report moments.
    Validate,
    /// Tabulate mu(alpha), lambda(alpha), D, D', D'' over an alpha grid.
    Rate,
    /// Asymptotic P(Z(n) = x).
    Pmf,
    /// Exact P(Z(n) = x) for every x.
    Exact,
    /// Exact against asymptotic P(Z(n) = x).
    Compare,
    /// Exact against asymptotic renewal measure H({t} x {x}).
    Renewal,
    /// Local limit theorem for the sums S_n against exact convolution.
    Clt,
    /// Monte Carlo estimate of P(Z(n) = x).
    Simulate,
    /// Domain boundaries and the beta-interval.
    Domain,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Core(CrpError),
    Internal(String),
}

impl From<CrpError> for CliError {
    fn from(e: CrpError) -> Self {
        CliError::Core(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Core(e) => match e {
                CrpError::InvalidModel(_) => 1,
                CrpError::ConditionViolated { .. } | CrpError::Divergent { .. } => 3,
                CrpError::Numerical(_) => 4,
                _ if e.is_domain() => 2,
                _ => 4,
            },
            CliError::Internal(_) => 4,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Input(m) => format!("input error: {m}"),
            CliError::Core(
                e @ (CrpError::ConditionViolated { .. } | CrpError::Divergent { .. }),
            ) => {
                format!("condition error: {e}")
            }
            CliError::Core(CrpError::InvalidModel(m)) => format!("input error: {m}"),
            CliError::Core(e) if e.is_domain() => format!("domain error: {e}"),
            CliError::Core(e) => format!("internal error: {e}"),
            CliError::Internal(m) => format!("internal error: {m}"),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("crp: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
