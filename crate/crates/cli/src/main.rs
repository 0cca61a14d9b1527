//! `smsrecon`: simulate SMS acquisitions, calibrate GRAPPA kernels,
//! reconstruct and evaluate.
//!
//! Exit codes: 0 success, 2 configuration, 3 I/O, 4 numerical failure.
//! `SMS_THREADS` caps the worker pool.

mod commands;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser)]
#[command(name = "smsrecon", version, about = "Simultaneous-multislice MRI reconstruction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate phantom, coil maps, SMS measurement and calibration scan.
    Simulate(SimulateArgs),
    /// Fit GRAPPA kernels on a calibration scan.
    Calibrate(CalibrateArgs),
    /// Reconstruct a measurement.
    Recon(ReconArgs),
    /// Compare a reconstruction against a reference.
    Eval(EvalArgs),
}

#[derive(Args)]
pub struct SimulateArgs {
    /// Simulation config or a previous run's manifest.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct CalibrateArgs {
    /// Reconstruction config (needs `inputs.calibration`) or a manifest.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct ReconArgs {
    /// Reconstruction config or a previous run's manifest.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// roger, zerofill, cgsense, l1wavelet or rograppa.
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub lfe_size: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    /// JSON with `reference`, `test` and optional `png`, or a manifest.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long)]
    pub test: Option<PathBuf>,
    /// Also write an 8-bit error map.
    #[arg(long)]
    pub png: bool,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SMS_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| CliError::Config(format!("SMS_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn run(cli: Cli) -> Result<manifest::RunManifest, CliError> {
    init_threads()?;
    match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Calibrate(a) => commands::calibrate(&a),
        Command::Recon(a) => commands::recon(&a),
        Command::Eval(a) => commands::eval(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(m) => {
            if let Some(p) = m.outputs.get("manifest") {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
