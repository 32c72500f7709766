//! `emfg` command line tool.

mod commands;
mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(
    name = "emfg",
    version,
    about = "EM identification of FIR and AR models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw a data set and write it as CSV plus a JSON sidecar.
    Simulate(SimulateArgs),
    /// Estimate the coefficients of a data set with EM.
    Identify(IdentifyArgs),
    /// Compare the closed-form message tables against the brute-force oracles.
    CheckTables(CheckArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ModelArg {
    Fir,
    Ar,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ScheduleArg {
    Batch,
    Serial,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Model order n.
    #[arg(long)]
    order: usize,
    /// Number of observations N.
    #[arg(long)]
    length: usize,
    /// Innovation variance σ_U².
    #[arg(long)]
    sigma_u: f64,
    /// Observation noise variance σ_Z².
    #[arg(long)]
    sigma_z: f64,
    /// True coefficients, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    theta: Vec<f64>,
    #[arg(long, env = "EMFG_SEED", default_value_t = 0)]
    seed: u64,
    /// CSV output; the sidecar goes next to it with a `.json` extension.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct IdentifyArgs {
    /// CSV data set with header `k,y`.
    #[arg(long = "in")]
    input: PathBuf,
    /// Model kind; read from the sidecar if omitted.
    #[arg(long, value_enum)]
    model: Option<ModelArg>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    sigma_u: Option<f64>,
    #[arg(long)]
    sigma_z: Option<f64>,
    /// Starting point, comma separated. Defaults to the automatic start.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 500)]
    max_iter: usize,
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
    #[arg(long, value_enum, default_value = "batch")]
    schedule: ScheduleArg,
    /// Accepted for symmetry with `simulate`; identification is deterministic.
    #[arg(long, env = "EMFG_SEED")]
    seed: Option<u64>,
    /// JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CheckArgs {
    #[arg(long, env = "EMFG_SEED", default_value_t = 0)]
    seed: u64,
    /// Random instances per case.
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Perturb the closed forms of one multiplier kind (mutation smoke test).
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            return report(CliError::Config(e.to_string()));
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Identify(a) => commands::identify(&a),
        Command::CheckTables(a) => commands::check_tables(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => report(e),
    }
}

fn report(e: CliError) -> ExitCode {
    let code = e.exit_code();
    let msg = e.to_string();
    let one_line: Vec<&str> = msg
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .collect();
    eprintln!("ERROR {code}: {}", one_line.join(" "));
    ExitCode::from(code)
}
